//! k-means (k-means++ or random init, best of `n_init` restarts) and the
//! size-preserving random relabeling used as the null clustering.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Embedding, Error, Result};

pub const DEFAULT_K: usize = 10;
pub const MAX_ITER: usize = 300;
pub const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    KMeansPlusPlus,
    Random,
}

impl Init {
    pub fn as_str(self) -> &'static str {
        match self {
            Init::KMeansPlusPlus => "kmeanspp",
            Init::Random => "random",
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeanspp" | "k-means++" | "kmeans++" => Ok(Init::KMeansPlusPlus),
            "random" => Ok(Init::Random),
            other => Err(Error::Format(format!("unknown init {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub init: Init,
    pub n_init: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams { k: DEFAULT_K, init: Init::KMeansPlusPlus, n_init: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub k: usize,
    pub init: Init,
    pub n_init: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Inertia after each assignment step of the winning run.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.vector
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn init_random<V: AsRef<[f64]>>(points: &[V], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    index::sample(rng, points.len(), k).into_iter().map(|i| points[i].as_ref().to_vec()).collect()
}

/// Greedy k-means++: at each step draw `2 + ln k` candidates from the
/// squared-distance law and keep the one with the lowest resulting potential.
fn init_plus_plus<V: AsRef<[f64]> + Sync>(points: &[V], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln() as usize;
    let mut centroids = vec![points[rng.gen_range(0..n)].as_ref().to_vec()];
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p.as_ref(), &centroids[0])).collect();
    let mut potential: f64 = closest.iter().sum();

    while centroids.len() < k {
        let mut candidates = Vec::with_capacity(trials);
        for _ in 0..trials {
            let idx = if potential > 0.0 {
                let target = rng.gen::<f64>() * potential;
                let mut acc = 0.0;
                let mut chosen = n - 1;
                for (i, d) in closest.iter().enumerate() {
                    acc += d;
                    if acc > target {
                        chosen = i;
                        break;
                    }
                }
                chosen
            } else {
                rng.gen_range(0..n)
            };
            candidates.push(idx);
        }
        let scored: Vec<(usize, Vec<f64>, f64)> = candidates
            .par_iter()
            .map(|&c| {
                let cp = points[c].as_ref();
                let upd: Vec<f64> = points.iter().zip(&closest).map(|(p, &d)| d.min(sq_dist(p.as_ref(), cp))).collect();
                let pot = upd.iter().sum();
                (c, upd, pot)
            })
            .collect();
        let (best, upd, pot) = scored
            .into_iter()
            .reduce(|a, b| if b.2 < a.2 { b } else { a })
            .expect("at least one candidate");
        centroids.push(points[best].as_ref().to_vec());
        closest = upd;
        potential = pot;
    }
    centroids
}

struct Run {
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn assign<V: AsRef<[f64]> + Sync>(points: &[V], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points.par_iter().map(|p| nearest(p.as_ref(), centroids)).unzip()
}

fn lloyd<V: AsRef<[f64]> + Sync>(points: &[V], mut centroids: Vec<Vec<f64>>) -> Run {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut trace = Vec::new();
    let (mut labels, mut dists) = assign(points, &centroids);
    let mut inertia: f64 = dists.iter().sum();
    trace.push(inertia);
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        // update in point order per cluster so results do not depend on threads
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        reseed_empty(points, &mut centroids, &mut labels, &mut dists, &mut counts);

        let (new_labels, new_dists) = assign(points, &centroids);
        let new_inertia: f64 = new_dists.iter().sum();
        debug_assert!(new_inertia <= inertia * (1.0 + 1e-12) + 1e-300, "inertia increased: {inertia} -> {new_inertia}");
        let converged = new_labels == labels || (inertia - new_inertia).abs() <= REL_TOL * inertia;
        labels = new_labels;
        dists = new_dists;
        inertia = new_inertia;
        trace.push(inertia);
        if converged {
            break;
        }
    }
    Run { centroids, labels, inertia, iterations, trace }
}

/// Moves each empty centroid onto the point farthest from its current
/// centroid, taking points only from clusters that keep at least one member.
fn reseed_empty<V: AsRef<[f64]>>(
    points: &[V],
    centroids: &mut [Vec<f64>],
    labels: &mut [usize],
    dists: &mut [f64],
    counts: &mut [usize],
) {
    let empty: Vec<usize> = (0..centroids.len()).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    let mut cursor = order.into_iter();
    for c in empty {
        for i in cursor.by_ref() {
            if counts[labels[i]] > 1 {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                dists[i] = 0.0;
                centroids[c] = points[i].as_ref().to_vec();
                break;
            }
        }
    }
}

/// k-means with Euclidean distance on raw vectors.
pub fn kmeans<V: AsRef<[f64]> + Sync>(points: &[V], params: &KMeansParams) -> Result<ClusterModel> {
    let n = points.len();
    let k = params.k;
    if k == 0 || k > n {
        return Err(Error::InvalidSpec(format!("k = {k} must be in [1, {n}]")));
    }
    if params.n_init == 0 {
        return Err(Error::InvalidSpec("n_init must be at least 1".into()));
    }
    let dim = points[0].as_ref().len();
    if let Some(bad) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.as_ref().len() });
    }
    let distinct: HashSet<Vec<u64>> = points.iter().map(|p| p.as_ref().iter().map(|v| v.to_bits()).collect()).collect();
    if distinct.len() < k {
        return Err(Error::Degenerate(format!("only {} distinct points for k = {k}", distinct.len())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Run> = None;
    for _ in 0..params.n_init {
        let init = match params.init {
            Init::KMeansPlusPlus => init_plus_plus(points, k, &mut rng),
            Init::Random => init_random(points, k, &mut rng),
        };
        let run = lloyd(points, init);
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let run = best.expect("n_init >= 1");
    Ok(ClusterModel {
        centroids: run.centroids,
        labels: run.labels,
        inertia: run.inertia,
        k,
        init: params.init,
        n_init: params.n_init,
        seed: params.seed,
        iterations: run.iterations,
        inertia_trace: run.trace,
    })
}

/// Uniformly random permutation of the label multiset.
pub fn random_relabel(labels: &[usize], seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = labels.to_vec();
    out.shuffle(&mut rng);
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRow {
    image_id: String,
    cluster: usize,
}

/// CSV with header `image_id,cluster`.
pub fn write_assignments<W: Write>(w: W, ids: &[String], labels: &[usize]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: ids.len(), got: labels.len() });
    }
    let mut wtr = csv::Writer::from_writer(w);
    for (id, &cluster) in ids.iter().zip(labels) {
        wtr.serialize(AssignmentRow { image_id: id.clone(), cluster })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_assignments<R: Read>(r: R) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: AssignmentRow = row?;
        out.push((row.image_id, row.cluster));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..6 {
            let t = i as f64;
            pts.push(vec![0.1 * t.sin(), 0.1 * t.cos()]);
            pts.push(vec![5.0 + 0.13 * (2.0 * t).cos(), 4.0 + 0.07 * t]);
        }
        pts
    }

    fn sse(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
        let mut total = 0.0;
        for c in 0..k {
            let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let dim = members[0].len();
            let mean: Vec<f64> =
                (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
            total += members.iter().map(|p| sq_dist(p, &mean)).sum::<f64>();
        }
        total
    }

    #[test]
    fn two_blobs_reach_global_optimum() {
        let pts = blobs();
        // brute force over all 2-partitions (point 0 pinned to cluster 0)
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << 11) {
            let labels: Vec<usize> = (0..12).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize }).collect();
            if labels.iter().all(|&l| l == 0) {
                continue;
            }
            best = best.min(sse(&pts, &labels, 2));
        }
        for init in [Init::KMeansPlusPlus, Init::Random] {
            let m = kmeans(&pts, &KMeansParams { k: 2, init, n_init: 10, seed: 1 }).unwrap();
            assert!((m.inertia - best).abs() < 1e-9, "{} vs {best}", m.inertia);
            for i in (0..12).step_by(2) {
                assert_eq!(m.labels[i], m.labels[0]);
                assert_ne!(m.labels[i + 1], m.labels[0]);
            }
        }
    }

    #[test]
    fn k_one_gives_mean() {
        let pts = blobs();
        let m = kmeans(&pts, &KMeansParams { k: 1, ..KMeansParams::default() }).unwrap();
        assert!(m.labels.iter().all(|&l| l == 0));
        let mean_x = pts.iter().map(|p| p[0]).sum::<f64>() / 12.0;
        assert!((m.centroids[0][0] - mean_x).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let pts = blobs();
        let m = kmeans(&pts, &KMeansParams { k: 12, ..KMeansParams::default() }).unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut labels = m.labels.clone();
        labels.sort();
        assert_eq!(labels, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn errors() {
        let pts = blobs();
        assert!(kmeans(&pts, &KMeansParams { k: 13, ..KMeansParams::default() }).is_err());
        assert!(kmeans(&pts, &KMeansParams { k: 0, ..KMeansParams::default() }).is_err());
        let mixed = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(
            kmeans(&mixed, &KMeansParams { k: 1, ..KMeansParams::default() }),
            Err(Error::DimensionMismatch { .. })
        ));
        let dup = vec![vec![1.0]; 5];
        assert!(kmeans(&dup, &KMeansParams { k: 2, ..KMeansParams::default() }).is_err());
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| (0..5).map(|_| rng.gen::<f64>()).collect()).collect();
        let p = KMeansParams { k: 7, init: Init::KMeansPlusPlus, n_init: 3, seed: 42 };
        let a = kmeans(&pts, &p).unwrap();
        let b = kmeans(&pts, &p).unwrap();
        assert_eq!(a.labels, b.labels);
        assert!(a.inertia_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(a.cluster_sizes().iter().all(|&s| s > 0));
        assert!(a.labels.iter().all(|&l| l < 7));
    }

    #[test]
    fn relabel_preserves_sizes() {
        let out = random_relabel(&[0, 0, 1, 1], 3);
        assert_eq!(out.iter().filter(|&&l| l == 0).count(), 2);
        assert_eq!(random_relabel(&[4, 4, 4], 9), vec![4, 4, 4]);
    }

    #[test]
    fn relabel_is_uniform_over_arrangements() {
        let mut counts = [0usize; 3];
        for seed in 0..10_000 {
            let out = random_relabel(&[0, 0, 1], seed);
            counts[out.iter().position(|&l| l == 1).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn assignments_csv_round_trip() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_assignments(&mut buf, &ids, &[1, 0]).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("image_id,cluster\n"));
        assert_eq!(read_assignments(&buf[..]).unwrap(), vec![("a".into(), 1), ("b".into(), 0)]);
    }
}
