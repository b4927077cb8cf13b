//! Embedding-space comparisons and the statistics used to report them.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::colormetrics::{color_similarity, ColorHistogram};
use crate::scattering::Embedding;
use crate::{Error, Result};

pub const DEFAULT_PAIRS: usize = 1000;

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Min-max scaling to `[0, 1]`; constant input maps to 0.5.
pub fn minmax(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Average-tie ranks, min-max scaled. All-equal input maps to 0.5.
pub fn rank_minmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::Degenerate("rank_minmax needs at least two values".into()));
    }
    Ok(minmax(&average_ranks(values)))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

/// Spearman rank correlation; two-tailed p from the t approximation with
/// `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("spearman needs at least 3 samples, got {n}")));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::Degenerate("spearman rho undefined for constant input".into()))?;
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        two_tailed_t(t, df)
    };
    Ok(Correlation { rho, p, n })
}

fn two_tailed_t(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn two_tailed_z(z: f64) -> f64 {
    (2.0 * Normal::standard().sf(z.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
}

fn check_counts(s: usize, n: usize) -> Result<()> {
    if n == 0 || s > n {
        return Err(Error::InvalidSpec(format!("need 0 <= successes <= n and n >= 1, got {s}/{n}")));
    }
    Ok(())
}

/// One-sample z test of a proportion against `p0`, normal approximation
/// without continuity correction.
pub fn proportion_test(successes: usize, n: usize, p0: f64) -> Result<TestResult> {
    check_counts(successes, n)?;
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidSpec(format!("p0 must lie in (0, 1), got {p0}")));
    }
    let phat = successes as f64 / n as f64;
    let z = (phat - p0) / (p0 * (1.0 - p0) / n as f64).sqrt();
    Ok(TestResult { statistic: z, p: two_tailed_z(z) })
}

/// Two-sample z test with pooled variance.
pub fn two_sample_proportion_test(s1: usize, n1: usize, s2: usize, n2: usize) -> Result<TestResult> {
    check_counts(s1, n1)?;
    check_counts(s2, n2)?;
    let (p1, p2) = (s1 as f64 / n1 as f64, s2 as f64 / n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        // both samples all-success or all-failure: no evidence of a difference
        return Ok(TestResult { statistic: 0.0, p: 1.0 });
    }
    let z = (p1 - p2) / se;
    Ok(TestResult { statistic: z, p: two_tailed_z(z) })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t test, two-tailed.
pub fn t_test_two_tailed(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate("t test needs at least two samples per group".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (qa, qb) = (va / a.len() as f64, vb / b.len() as f64);
    if qa + qb == 0.0 {
        return Err(Error::Degenerate("t test with zero variance in both groups".into()));
    }
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (a.len() - 1) as f64 + qb * qb / (b.len() - 1) as f64);
    Ok(TestResult { statistic: t, p: two_tailed_t(t, df) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalComponent {
    pub variance: f64,
    pub explained: f64,
    /// Unit loading vector; the largest-magnitude entry is positive.
    pub loading: Vec<f64>,
    /// Ids with the smallest projections, most extreme first.
    pub min_ids: Vec<String>,
    pub max_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub components: Vec<PrincipalComponent>,
    /// Set when the covariance rank was below the requested component count.
    pub rank_deficient: bool,
}

impl Pca {
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.loading.iter().zip(v).zip(&self.mean).map(|((l, x), m)| l * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            for (o, l) in out.iter_mut().zip(&c.loading) {
                *o += s * l;
            }
        }
        out
    }
}

const RANK_TOL: f64 = 1e-12;

/// Covariance PCA; for each of the leading components, the `m` images with
/// the smallest and largest projections.
pub fn pca_extremes(embeddings: &[Embedding], n_components: usize, m: usize) -> Result<Pca> {
    let n = embeddings.len();
    if n < n_components + 1 || n < 2 {
        return Err(Error::Degenerate(format!("PCA of {n} samples cannot yield {n_components} components")));
    }
    let d = embeddings[0].dim();
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
    }
    let mean: Vec<f64> = (0..d).map(|k| embeddings.iter().map(|e| e.vector[k]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, k| embeddings[i].vector[k] - mean[k]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > RANK_TOL * top.max(f64::MIN_POSITIVE)).count();
    let keep = n_components.min(rank);

    let components = order[..keep]
        .iter()
        .map(|&c| {
            let mut loading: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let lead = loading.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if lead < 0.0 {
                loading.iter_mut().for_each(|v| *v = -*v);
            }
            let proj: Vec<f64> = (0..n).map(|i| centered.row(i).iter().zip(&loading).map(|(x, l)| x * l).sum()).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]));
            let take = m.min(n);
            let variance = eig.eigenvalues[c].max(0.0);
            PrincipalComponent {
                variance,
                explained: if total > 0.0 { variance / total } else { 0.0 },
                loading,
                min_ids: idx[..take].iter().map(|&i| embeddings[i].image_id.clone()).collect(),
                max_ids: idx[n - take..].iter().rev().map(|&i| embeddings[i].image_id.clone()).collect(),
            }
        })
        .collect();
    Ok(Pca { mean, components, rank_deficient: keep < n_components })
}

/// One sampled image pair for the color-vision test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub id_a: String,
    pub id_b: String,
    pub embedding_similarity: f64,
    pub color_similarity: f64,
    /// Average of the two images' mean Jz.
    pub mean_jz: f64,
}

/// `count` uniformly drawn pairs of distinct indices below `n`.
pub fn sample_pairs(n: usize, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::Degenerate(format!("cannot draw pairs from {n} items")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect())
}

/// Indices of embeddings with a nonzero vector, i.e. those cosine similarity
/// is defined for. A uniform image (e.g. a black block on a black border)
/// scatters to exactly zero.
pub fn nonzero_embeddings(embeddings: &[Embedding]) -> Vec<usize> {
    (0..embeddings.len()).filter(|&i| embeddings[i].vector.iter().any(|&x| x != 0.0)).collect()
}

/// [`sample_pairs`] restricted to `eligible` indices. Identical to
/// `sample_pairs(n, ..)` when `eligible` is `0..n`.
pub fn sample_pairs_among(eligible: &[usize], count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    Ok(sample_pairs(eligible.len(), count, seed)?.into_iter().map(|(a, b)| (eligible[a], eligible[b])).collect())
}

/// Per-image inputs to the color-vision test, index-aligned.
pub struct VisionInputs<'a> {
    pub embeddings: &'a [Embedding],
    pub histograms: &'a [ColorHistogram],
    pub mean_jz: &'a [f64],
}

pub fn pair_samples(inputs: &VisionInputs<'_>, pairs: &[(usize, usize)]) -> Result<Vec<PairSample>> {
    let n = inputs.embeddings.len();
    for len in [inputs.histograms.len(), inputs.mean_jz.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let (ea, eb) = (&inputs.embeddings[a], &inputs.embeddings[b]);
            Ok(PairSample {
                id_a: ea.image_id.clone(),
                id_b: eb.image_id.clone(),
                embedding_similarity: cosine_similarity(&ea.vector, &eb.vector)?,
                color_similarity: color_similarity(&inputs.histograms[a], &inputs.histograms[b])?,
                mean_jz: 0.5 * (inputs.mean_jz[a] + inputs.mean_jz[b]),
            })
        })
        .collect()
}

/// Spearman correlation between embedding and color similarity.
pub fn vision_correlation(pairs: &[PairSample]) -> Result<Correlation> {
    let e: Vec<f64> = pairs.iter().map(|p| p.embedding_similarity).collect();
    let c: Vec<f64> = pairs.iter().map(|p| p.color_similarity).collect();
    spearman(&e, &c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LuminanceRelation {
    /// `(minmax-normalized mean Jz, embedding similarity)` per pair.
    pub rows: Vec<(f64, f64)>,
    /// Fraction of below-median-luminance pairs whose similarity is below
    /// the overall mean; `None` when no pair lies below the median.
    pub asymmetry: Option<f64>,
}

pub fn luminance_relation(pairs: &[PairSample]) -> Result<LuminanceRelation> {
    if pairs.is_empty() {
        return Err(Error::Degenerate("no pairs".into()));
    }
    let jz = minmax(&pairs.iter().map(|p| p.mean_jz).collect::<Vec<_>>());
    let sims: Vec<f64> = pairs.iter().map(|p| p.embedding_similarity).collect();
    let mut sorted = jz.clone();
    sorted.sort_by(f64::total_cmp);
    let median = crate::colormetrics::percentile(&sorted, 50.0);
    let mean_sim = sims.iter().sum::<f64>() / sims.len() as f64;
    let below: Vec<usize> = (0..jz.len()).filter(|&i| jz[i] < median).collect();
    let asymmetry =
        (!below.is_empty()).then(|| below.iter().filter(|&&i| sims[i] < mean_sim).count() as f64 / below.len() as f64);
    Ok(LuminanceRelation { rows: jz.into_iter().zip(sims).collect(), asymmetry })
}

/// CSV `id_a,id_b,embedding_similarity,color_similarity,mean_jz`.
pub fn write_pairs_csv<W: Write>(w: W, pairs: &[PairSample]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in pairs {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

/// CSV `mean_jz_minmax,embedding_similarity`.
pub fn write_luminance_csv<W: Write>(w: W, rel: &LuminanceRelation) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["mean_jz_minmax", "embedding_similarity"])?;
    for (jz, s) in &rel.rows {
        wtr.write_record([jz.to_string(), s.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
