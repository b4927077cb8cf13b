//! Color-coherence measurements on image groupings.
//!
//! Each image's central region is summarized by an 8-bin JzAzBz octant
//! histogram; two images' color similarity is `1 - JSD` (base 2) between
//! their histograms. Groupings are scored by within-cluster similarity
//! against a relabeling null, and by the coherence fraction `f`: the share
//! of images whose mean color lies in the convex hull of exactly one
//! cluster.

pub mod hull;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::random_relabel;
use crate::colorspace::{rgb_to_jzazbz, JzazbzPixel, SrgbPixel, AZ_RANGE, BZ_RANGE, JZ_RANGE};
use crate::datagen::ImageRecord;
use crate::{Error, Result};

pub use hull::ConvexHull;

pub const BINS: usize = 8;
pub const HULL_TOL: f64 = 1e-9;
pub const DEFAULT_REALIZATIONS: usize = 100;
const NORM_TOL: f64 = 1e-9;

const fn midpoint(r: (f64, f64)) -> f64 {
    (r.0 + r.1) / 2.0
}

/// Per-axis octant boundaries: midpoints of the sRGB gamut extent.
pub const OCTANT_SPLIT: [f64; 3] = [midpoint(JZ_RANGE), midpoint(AZ_RANGE), midpoint(BZ_RANGE)];

/// Octant index: bit 2 set for high Jz, bit 1 for high Az, bit 0 for high Bz.
pub fn octant(p: JzazbzPixel) -> usize {
    ((p.jz >= OCTANT_SPLIT[0]) as usize) << 2 | ((p.az >= OCTANT_SPLIT[1]) as usize) << 1 | (p.bz >= OCTANT_SPLIT[2]) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    pub bins: [f64; BINS],
}

impl ColorHistogram {
    /// Validates nonnegativity and unit mass.
    pub fn new(bins: [f64; BINS]) -> Result<Self> {
        if bins.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return Err(Error::Format(format!("histogram weights must be finite and nonnegative: {bins:?}")));
        }
        let sum: f64 = bins.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::Format(format!("histogram mass is {sum}, expected 1")));
        }
        Ok(ColorHistogram { bins })
    }

    pub fn from_counts(counts: [usize; BINS]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::Degenerate("no pixels to histogram".into()));
        }
        Ok(ColorHistogram { bins: counts.map(|c| c as f64 / total as f64) })
    }
}

fn require_mask(img: &ImageRecord) -> Result<()> {
    if img.central_mask.is_empty() {
        return Err(Error::Degenerate(format!("{}: empty central mask", img.id)));
    }
    Ok(())
}

/// Converts central-region pixels, reusing the last conversion across runs
/// of equal pixels.
fn for_each_central(img: &ImageRecord, mut f: impl FnMut(JzazbzPixel)) {
    let mut last: Option<(SrgbPixel, JzazbzPixel)> = None;
    for px in img.central_pixels() {
        let jz = match last {
            Some((p, j)) if p == px => j,
            _ => {
                let j = rgb_to_jzazbz(px);
                last = Some((px, j));
                j
            }
        };
        f(jz);
    }
}

pub fn color_histogram(img: &ImageRecord) -> Result<ColorHistogram> {
    require_mask(img)?;
    let mut counts = [0usize; BINS];
    for_each_central(img, |p| counts[octant(p)] += 1);
    ColorHistogram::from_counts(counts)
}

/// Arithmetic mean JzAzBz coordinate of the central region.
pub fn mean_color(img: &ImageRecord) -> Result<JzazbzPixel> {
    require_mask(img)?;
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for_each_central(img, |p| {
        acc[0] += p.jz;
        acc[1] += p.az;
        acc[2] += p.bz;
        n += 1;
    });
    let n = n as f64;
    Ok(JzazbzPixel { jz: acc[0] / n, az: acc[1] / n, bz: acc[2] / n })
}

fn kl_to_mixture(p: &[f64; BINS], m: &[f64; BINS]) -> f64 {
    p.iter().zip(m).filter(|(&pi, _)| pi > 0.0).map(|(&pi, &mi)| pi * (pi / mi).log2()).sum()
}

/// Jensen-Shannon divergence in bits against the mixture `(p + q) / 2`.
pub fn js_divergence(p: &ColorHistogram, q: &ColorHistogram) -> f64 {
    let m: [f64; BINS] = std::array::from_fn(|i| 0.5 * (p.bins[i] + q.bins[i]));
    let d = 0.5 * (kl_to_mixture(&p.bins, &m) + kl_to_mixture(&q.bins, &m));
    d.clamp(0.0, 1.0)
}

fn similarity_unchecked(a: &ColorHistogram, b: &ColorHistogram) -> f64 {
    // evaluate in a canonical argument order so the result is exactly symmetric
    let (x, y) = if a.bins <= b.bins { (a, b) } else { (b, a) };
    1.0 - js_divergence(x, y)
}

/// `C = 1 - JSD`, in `[0, 1]`.
pub fn color_similarity(a: &ColorHistogram, b: &ColorHistogram) -> Result<f64> {
    ColorHistogram::new(a.bins)?;
    ColorHistogram::new(b.bins)?;
    Ok(similarity_unchecked(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSimilarity {
    pub a: usize,
    pub b: usize,
    pub cluster: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStats {
    pub pairs: Vec<PairSimilarity>,
    /// Indexed by cluster label; `None` for clusters with fewer than two members.
    pub cluster_means: Vec<Option<f64>>,
    /// Mean over all within-cluster pairs; `None` if there are none.
    pub grand_mean: Option<f64>,
}

fn check_labels(n: usize, labels: &[usize]) -> Result<()> {
    if n != labels.len() {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    Ok(())
}

fn members_by_cluster(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
}

/// Evaluates every unordered within-cluster pair.
pub fn within_cluster_similarity(hists: &[ColorHistogram], labels: &[usize]) -> Result<SimilarityStats> {
    check_labels(hists.len(), labels)?;
    let members = members_by_cluster(labels);
    let per_cluster: Vec<Vec<PairSimilarity>> = members
        .par_iter()
        .enumerate()
        .map(|(c, idx)| {
            let mut out = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
            for (x, &i) in idx.iter().enumerate() {
                for &j in &idx[x + 1..] {
                    out.push(PairSimilarity { a: i, b: j, cluster: c, similarity: similarity_unchecked(&hists[i], &hists[j]) });
                }
            }
            out
        })
        .collect();
    let cluster_means = per_cluster
        .iter()
        .map(|p| (!p.is_empty()).then(|| p.iter().map(|s| s.similarity).sum::<f64>() / p.len() as f64))
        .collect();
    let pairs: Vec<PairSimilarity> = per_cluster.into_iter().flatten().collect();
    let grand_mean = (!pairs.is_empty()).then(|| pairs.iter().map(|s| s.similarity).sum::<f64>() / pairs.len() as f64);
    Ok(SimilarityStats { pairs, cluster_means, grand_mean })
}

fn grand_mean_only(hists: &[ColorHistogram], labels: &[usize]) -> Option<f64> {
    let members = members_by_cluster(labels);
    let (sum, count) = members
        .iter()
        .map(|idx| {
            let mut s = 0.0;
            let mut c = 0usize;
            for (x, &i) in idx.iter().enumerate() {
                for &j in &idx[x + 1..] {
                    s += similarity_unchecked(&hists[i], &hists[j]);
                    c += 1;
                }
            }
            (s, c)
        })
        .fold((0.0, 0usize), |a, b| (a.0 + b.0, a.1 + b.1));
    (count > 0).then(|| sum / count as f64)
}

/// Mean and central 95% interval of a statistic across null realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub realizations: Vec<f64>,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl NullSummary {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("no null realizations".into()));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(NullSummary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lo95: percentile(&sorted, 2.5),
            hi95: percentile(&sorted, 97.5),
            realizations: values,
        })
    }
}

/// One relabeling seed per realization, drawn from a stream seeded by `seed`.
fn realization_seeds(realizations: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..realizations).map(|_| rng.gen()).collect()
}

/// Grand-mean similarity under `realizations` size-preserving relabelings.
pub fn null_distribution(hists: &[ColorHistogram], labels: &[usize], realizations: usize, seed: u64) -> Result<NullSummary> {
    check_labels(hists.len(), labels)?;
    let means: Vec<Option<f64>> = realization_seeds(realizations, seed)
        .par_iter()
        .map(|&s| grand_mean_only(hists, &random_relabel(labels, s)))
        .collect();
    let means: Option<Vec<f64>> = means.into_iter().collect();
    NullSummary::from_values(means.ok_or_else(|| Error::Degenerate("labeling has no within-cluster pairs".into()))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterHull {
    pub cluster: usize,
    pub size: usize,
    /// Affine dimension of the hull (0..=3).
    pub dimension: Option<usize>,
    pub facets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSummary {
    pub per_cluster: Vec<ClusterHull>,
    /// Number of cluster hulls containing each image's point.
    pub containment: Vec<usize>,
    pub f: f64,
}

fn hulls_for(points: &[[f64; 3]], labels: &[usize]) -> Vec<(Vec<usize>, ConvexHull)> {
    members_by_cluster(labels)
        .into_iter()
        .map(|idx| {
            let pts: Vec<[f64; 3]> = idx.iter().map(|&i| points[i]).collect();
            let hull = ConvexHull::new(&pts);
            (idx, hull)
        })
        .collect()
}

fn containment_counts(points: &[[f64; 3]], hulls: &[(Vec<usize>, ConvexHull)]) -> Vec<usize> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            hulls
                .iter()
                .filter(|(members, hull)| members.binary_search(&i).is_ok() || hull.contains(p, HULL_TOL))
                .count()
        })
        .collect()
}

fn fraction_exactly_one(counts: &[usize]) -> f64 {
    counts.iter().filter(|&&c| c == 1).count() as f64 / counts.len() as f64
}

/// Coherence fraction over per-image mean colors.
pub fn coherence_fraction(points: &[[f64; 3]], labels: &[usize]) -> Result<HullSummary> {
    check_labels(points.len(), labels)?;
    if points.is_empty() {
        return Err(Error::Degenerate("no points".into()));
    }
    let hulls = hulls_for(points, labels);
    let containment = containment_counts(points, &hulls);
    let per_cluster = hulls
        .iter()
        .enumerate()
        .map(|(c, (idx, h))| ClusterHull { cluster: c, size: idx.len(), dimension: h.dimension(), facets: h.facet_count() })
        .collect();
    Ok(HullSummary { per_cluster, f: fraction_exactly_one(&containment), containment })
}

/// Coherence fraction under `realizations` size-preserving relabelings.
pub fn coherence_null(points: &[[f64; 3]], labels: &[usize], realizations: usize, seed: u64) -> Result<NullSummary> {
    check_labels(points.len(), labels)?;
    if points.is_empty() {
        return Err(Error::Degenerate("no points".into()));
    }
    let fs: Vec<f64> = realization_seeds(realizations, seed)
        .par_iter()
        .map(|&s| {
            let relabeled = random_relabel(labels, s);
            let hulls = hulls_for(points, &relabeled);
            fraction_exactly_one(&containment_counts(points, &hulls))
        })
        .collect();
    NullSummary::from_values(fs)
}

pub fn histograms(images: &[ImageRecord]) -> Result<Vec<ColorHistogram>> {
    images.par_iter().map(color_histogram).collect()
}

pub fn mean_colors(images: &[ImageRecord]) -> Result<Vec<[f64; 3]>> {
    images.par_iter().map(|i| mean_color(i).map(JzazbzPixel::to_array)).collect()
}

/// Both coherence measures of one labeling with their relabeling nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringEvaluation {
    pub similarity: SimilarityStats,
    pub similarity_null: NullSummary,
    pub hull: HullSummary,
    pub hull_null: NullSummary,
}

/// `hists` and `points` are index-aligned with `labels`. Both nulls use the
/// same relabeling seeds.
pub fn evaluate_clustering(
    hists: &[ColorHistogram],
    points: &[[f64; 3]],
    labels: &[usize],
    realizations: usize,
    seed: u64,
) -> Result<ClusteringEvaluation> {
    Ok(ClusteringEvaluation {
        similarity: within_cluster_similarity(hists, labels)?,
        similarity_null: null_distribution(hists, labels, realizations, seed)?,
        hull: coherence_fraction(points, labels)?,
        hull_null: coherence_null(points, labels, realizations, seed)?,
    })
}

#[derive(Debug, Serialize)]
struct NullInterval {
    mean: f64,
    lo95: f64,
    hi95: f64,
}

#[derive(Debug, Serialize)]
struct HullReport<'a> {
    per_cluster: &'a [ClusterHull],
    f: f64,
    null: NullInterval,
}

/// JSON `{per_cluster, f, null: {mean, lo95, hi95}}`.
pub fn write_hull_json<W: Write>(w: W, hull: &HullSummary, null: &NullSummary) -> Result<()> {
    let report = HullReport {
        per_cluster: &hull.per_cluster,
        f: hull.f,
        null: NullInterval { mean: null.mean, lo95: null.lo95, hi95: null.hi95 },
    };
    serde_json::to_writer_pretty(w, &report)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PairRow<'a> {
    pair_id_a: &'a str,
    pair_id_b: &'a str,
    cluster: usize,
    similarity: f64,
}

/// CSV `pair_id_a,pair_id_b,cluster,similarity`.
pub fn write_similarity_csv<W: Write>(w: W, ids: &[String], stats: &SimilarityStats) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in &stats.pairs {
        wtr.serialize(PairRow { pair_id_a: &ids[p.a], pair_id_b: &ids[p.b], cluster: p.cluster, similarity: p.similarity })?;
    }
    wtr.flush()?;
    Ok(())
}
