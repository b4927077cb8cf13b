//! Clustering, color coherence, and the color-vision test.

use std::path::PathBuf;

use clap::Args;
use huewave::analysis::{
    luminance_relation, nonzero_embeddings, pair_samples, pca_extremes, rank_minmax, sample_pairs_among, t_test_two_tailed, vision_correlation,
    write_luminance_csv, write_pairs_csv, Correlation, LuminanceRelation, PairSample, TestResult, VisionInputs,
    DEFAULT_PAIRS,
};
use huewave::clustering::{kmeans, write_assignments, KMeansParams, DEFAULT_K};
use huewave::colormetrics::{
    coherence_fraction, coherence_null, histograms, mean_colors, null_distribution, within_cluster_similarity,
    write_hull_json, write_similarity_csv, ColorHistogram, HullSummary, NullSummary, SimilarityStats,
    DEFAULT_REALIZATIONS,
};
use huewave::{ClusterModel, Embedding, ImageRecord, Init};
use serde::Serialize;

use crate::output::{
    aligned_embeddings, image_ids, load_assignments, load_dataset, load_embeddings, parse_named, slug, usage, CliResult,
    Named, OutDir,
};
use crate::plots::{self, Histogram, Series};

pub const DEFAULT_BINS: usize = 20;

#[derive(Args, Debug, Serialize)]
pub struct KMeansArgs {
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// `kmeanspp` or `random`.
    #[arg(long, default_value_t = Init::KMeansPlusPlus)]
    pub init: Init,
    #[arg(long, default_value_t = 10)]
    pub n_init: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl KMeansArgs {
    fn params(&self) -> KMeansParams {
        KMeansParams { k: self.k, init: self.init, n_init: self.n_init, seed: self.seed }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct NullArgs {
    /// Random relabelings for the null distribution.
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    pub realizations: usize,
    #[arg(long, default_value_t = 1)]
    pub null_seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct Cluster {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct Coherence {
    #[arg(long)]
    pub data: PathBuf,
    /// `image_id,cluster` CSV from `cluster`.
    #[arg(long)]
    pub assignments: PathBuf,
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct Similarity {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub assignments: PathBuf,
    #[command(flatten)]
    pub null: NullArgs,
    /// Histogram bins over [0, 1].
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PairArgs {
    #[arg(long, default_value_t = DEFAULT_PAIRS)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub pair_seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct VisionTest {
    /// Block dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[command(flatten)]
    pub sampling: PairArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PcaExtremes {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    /// Images reported at each end of every component.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct Study1Report {
    /// Dataset clustered for the coherence analyses.
    #[arg(long)]
    pub data: PathBuf,
    /// `NAME=FILE`, repeatable; the first is the reference algorithm.
    #[arg(long = "embeddings", value_parser = parse_named, required = true)]
    pub embeddings: Vec<Named>,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Block dataset for the color-vision test.
    #[arg(long, requires = "block_embeddings")]
    pub blocks: Option<PathBuf>,
    /// `NAME=FILE` embeddings of the block dataset, repeatable.
    #[arg(long = "block-embeddings", value_parser = parse_named, requires = "blocks")]
    pub block_embeddings: Vec<Named>,
    #[command(flatten)]
    pub sampling: PairArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Interval {
    mean: f64,
    lo95: f64,
    hi95: f64,
}

impl From<&NullSummary> for Interval {
    fn from(n: &NullSummary) -> Self {
        Interval { mean: n.mean, lo95: n.lo95, hi95: n.hi95 }
    }
}

#[derive(Serialize)]
struct SimilaritySummary {
    pairs: usize,
    grand_mean: Option<f64>,
    cluster_means: Vec<Option<f64>>,
    null: Interval,
}

impl SimilaritySummary {
    fn new(stats: &SimilarityStats, null: &NullSummary) -> Self {
        SimilaritySummary {
            pairs: stats.pairs.len(),
            grand_mean: stats.grand_mean,
            cluster_means: stats.cluster_means.clone(),
            null: null.into(),
        }
    }
}

#[derive(Serialize)]
struct VisionSummary {
    #[serde(flatten)]
    correlation: Correlation,
    asymmetry: Option<f64>,
    /// Images left out of pair sampling because their embedding is zero.
    excluded: usize,
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    algorithm: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
    fraction: f64,
}

fn check_bins(bins: usize) -> CliResult {
    if bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    Ok(())
}

fn check_realizations(n: &NullArgs) -> CliResult {
    if n.realizations == 0 {
        return Err(usage("--realizations must be positive"));
    }
    Ok(())
}

/// Counts of pair similarities in `bins` equal bins over [0, 1]; 1.0 falls
/// in the last bin.
fn bin_counts(stats: &SimilarityStats, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for p in &stats.pairs {
        let b = ((p.similarity.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

fn fractions(counts: &[usize]) -> Vec<f64> {
    let total = counts.iter().sum::<usize>().max(1) as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

fn write_histogram_rows<W: std::io::Write>(w: &mut csv::Writer<W>, name: &str, counts: &[usize]) -> csv::Result<()> {
    let bins = counts.len() as f64;
    for ((i, &count), fraction) in counts.iter().enumerate().zip(fractions(counts)) {
        w.serialize(HistogramRow { algorithm: name, bin_lo: i as f64 / bins, bin_hi: (i + 1) as f64 / bins, count, fraction })?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::output::CliError {
    crate::output::data(e.to_string())
}

pub fn cluster_cmd(a: &Cluster) -> CliResult {
    let emb = load_embeddings(&a.embeddings)?;
    let model = kmeans(&emb, &a.kmeans.params())?;
    let out = OutDir::create(&a.out, "cluster", a)?;
    write_cluster(&out, "", &emb, &model)?;
    eprintln!("clustered {} embeddings into {} clusters (inertia {:.6e})", emb.len(), model.k, model.inertia);
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    k: usize,
    sizes: Vec<usize>,
    inertia: f64,
    iterations: usize,
    inertia_trace: &'a [f64],
    centroids: &'a [Vec<f64>],
}

fn write_cluster(out: &OutDir, suffix: &str, emb: &[Embedding], model: &ClusterModel) -> CliResult {
    let ids: Vec<String> = emb.iter().map(|e| e.image_id.clone()).collect();
    out.write_with(&format!("assignments{suffix}.csv"), |w| write_assignments(w, &ids, &model.labels))?;
    let mut sizes = vec![0; model.k];
    for &l in &model.labels {
        sizes[l] += 1;
    }
    out.write_json(
        &format!("cluster{suffix}.json"),
        &ClusterSummary {
            k: model.k,
            sizes,
            inertia: model.inertia,
            iterations: model.iterations,
            inertia_trace: &model.inertia_trace,
            centroids: &model.centroids,
        },
    )
}

#[derive(Serialize)]
struct MeanColorRow<'a> {
    image_id: &'a str,
    jz: f64,
    az: f64,
    bz: f64,
    cluster: usize,
    containing_hulls: usize,
}

fn coherence(points: &[[f64; 3]], labels: &[usize], null: &NullArgs) -> CliResult<(HullSummary, NullSummary)> {
    check_realizations(null)?;
    Ok((coherence_fraction(points, labels)?, coherence_null(points, labels, null.realizations, null.null_seed)?))
}

fn write_coherence(
    out: &OutDir,
    suffix: &str,
    ids: &[String],
    points: &[[f64; 3]],
    labels: &[usize],
    hull: &HullSummary,
    null: &NullSummary,
    plots: bool,
) -> CliResult {
    out.write_with(&format!("hull{suffix}.json"), |w| write_hull_json(w, hull, null))?;
    let mut w = csv::Writer::from_writer(out.writer(&format!("mean_colors{suffix}.csv"))?);
    for (i, p) in points.iter().enumerate() {
        w.serialize(MeanColorRow {
            image_id: &ids[i],
            jz: p[0],
            az: p[1],
            bz: p[2],
            cluster: labels[i],
            containing_hulls: hull.containment[i],
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    if plots {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let names: Vec<String> = (0..k).map(|c| format!("cluster {c}")).collect();
        let series: Vec<Series<'_>> = (0..k)
            .map(|c| Series {
                name: &names[c],
                points: points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| (p[1], p[2])).collect(),
            })
            .collect();
        plots::scatter(
            &out.path(&format!("hull{suffix}.svg")),
            &format!("mean colors by cluster, f = {:.3}", hull.f),
            ("Az", "Bz"),
            &series,
            false,
        )?;
    }
    Ok(())
}

pub fn coherence_cmd(a: &Coherence, plots: bool) -> CliResult {
    let images = load_dataset(&a.data)?;
    let ids = image_ids(&images);
    let labels = load_assignments(&a.assignments, &ids)?;
    let points = mean_colors(&images)?;
    let (hull, null) = coherence(&points, &labels, &a.null)?;
    let out = OutDir::create(&a.out, "coherence", a)?;
    write_coherence(&out, "", &ids, &points, &labels, &hull, &null, plots)?;
    println!("f={:.4} null_mean={:.4} null_lo95={:.4} null_hi95={:.4}", hull.f, null.mean, null.lo95, null.hi95);
    Ok(())
}

fn similarity(hists: &[ColorHistogram], labels: &[usize], null: &NullArgs) -> CliResult<(SimilarityStats, NullSummary)> {
    check_realizations(null)?;
    Ok((within_cluster_similarity(hists, labels)?, null_distribution(hists, labels, null.realizations, null.null_seed)?))
}

pub fn similarity_cmd(a: &Similarity, plots: bool) -> CliResult {
    check_bins(a.bins)?;
    let images = load_dataset(&a.data)?;
    let ids = image_ids(&images);
    let labels = load_assignments(&a.assignments, &ids)?;
    let (stats, null) = similarity(&histograms(&images)?, &labels, &a.null)?;
    let out = OutDir::create(&a.out, "similarity", a)?;
    out.write_with("similarity_pairs.csv", |w| write_similarity_csv(w, &ids, &stats))?;
    let counts = bin_counts(&stats, a.bins);
    let mut w = csv::Writer::from_writer(out.writer("similarity_histogram.csv")?);
    write_histogram_rows(&mut w, "input", &counts).map_err(csv_err)?;
    w.flush()?;
    out.write_json("similarity.json", &SimilaritySummary::new(&stats, &null))?;
    if plots {
        let h = Histogram { name: "within-cluster pairs", fractions: fractions(&counts), mean: stats.grand_mean.unwrap_or(f64::NAN) };
        plots::histograms(&out.path("similarity_histogram.svg"), "color similarity", "color similarity", &[h], Some((null.lo95, null.hi95)))?;
    }
    match stats.grand_mean {
        Some(m) => println!("grand_mean={m:.4} null_mean={:.4} null_lo95={:.4} null_hi95={:.4}", null.mean, null.lo95, null.hi95),
        None => println!("grand_mean=none"),
    }
    Ok(())
}

struct Vision {
    samples: Vec<PairSample>,
    correlation: Correlation,
    luminance: LuminanceRelation,
    excluded: usize,
}

fn vision(images: &[ImageRecord], embeddings: &[Embedding], hists: &[ColorHistogram], sampling: &PairArgs) -> CliResult<Vision> {
    if sampling.pairs == 0 {
        return Err(usage("--pairs must be positive"));
    }
    let jz: Vec<f64> = mean_colors(images)?.iter().map(|p| p[0]).collect();
    // cosine is undefined for zero embeddings (uniform images)
    let eligible = nonzero_embeddings(embeddings);
    let pairs = sample_pairs_among(&eligible, sampling.pairs, sampling.pair_seed)?;
    let samples = pair_samples(&VisionInputs { embeddings, histograms: hists, mean_jz: &jz }, &pairs)?;
    Ok(Vision {
        correlation: vision_correlation(&samples)?,
        luminance: luminance_relation(&samples)?,
        samples,
        excluded: images.len() - eligible.len(),
    })
}

fn write_vision(out: &OutDir, suffix: &str, name: &str, v: &Vision, plots: bool) -> CliResult {
    out.write_with(&format!("vision_pairs{suffix}.csv"), |w| write_pairs_csv(w, &v.samples))?;
    out.write_with(&format!("luminance{suffix}.csv"), |w| write_luminance_csv(w, &v.luminance))?;
    if plots {
        let c: Vec<f64> = v.samples.iter().map(|s| s.color_similarity).collect();
        let e: Vec<f64> = v.samples.iter().map(|s| s.embedding_similarity).collect();
        let points = rank_minmax(&c)?.into_iter().zip(rank_minmax(&e)?).collect();
        plots::scatter(
            &out.path(&format!("vision{suffix}.svg")),
            &format!("{name}: Spearman rho = {:.3}", v.correlation.rho),
            ("color similarity (rank, minmax)", "embedding similarity (rank, minmax)"),
            &[Series { name, points }],
            true,
        )?;
        plots::scatter(
            &out.path(&format!("luminance{suffix}.svg")),
            &format!("{name}: embedding similarity vs luminance"),
            ("mean Jz (minmax)", "embedding similarity"),
            &[Series { name, points: v.luminance.rows.clone() }],
            false,
        )?;
    }
    Ok(())
}

pub fn vision_test_cmd(a: &VisionTest, plots: bool) -> CliResult {
    let images = load_dataset(&a.data)?;
    let emb = aligned_embeddings(&a.embeddings, &image_ids(&images))?;
    let v = vision(&images, &emb, &histograms(&images)?, &a.sampling)?;
    let out = OutDir::create(&a.out, "vision-test", a)?;
    write_vision(&out, "", "embeddings", &v, plots)?;
    out.write_json("vision.json", &VisionSummary { correlation: v.correlation.clone(), asymmetry: v.luminance.asymmetry, excluded: v.excluded })?;
    println!("rho={:.4} p={:.3e} n={}", v.correlation.rho, v.correlation.p, v.correlation.n);
    Ok(())
}

pub fn pca_extremes_cmd(a: &PcaExtremes) -> CliResult {
    let emb = load_embeddings(&a.embeddings)?;
    let pca = pca_extremes(&emb, a.components, a.m)?;
    let out = OutDir::create(&a.out, "pca-extremes", a)?;
    out.write_json("pca.json", &pca)?;
    let mut w = csv::Writer::from_writer(out.writer("pca_scores.csv")?);
    let mut header = vec!["image_id".to_string()];
    header.extend((1..=pca.components.len()).map(|i| format!("pc{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for e in &emb {
        let mut row = vec![e.image_id.clone()];
        row.extend(pca.project(&e.vector).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    for (i, c) in pca.components.iter().enumerate() {
        println!("pc{}: explained={:.4} min={:?} max={:?}", i + 1, c.explained, c.min_ids, c.max_ids);
    }
    Ok(())
}

#[derive(Serialize)]
struct AlgorithmSummary {
    name: String,
    dim: usize,
    inertia: f64,
    coherence: CoherenceSummary,
    similarity: SimilaritySummary,
}

#[derive(Serialize)]
struct CoherenceSummary {
    f: f64,
    null: Interval,
}

#[derive(Serialize)]
struct Comparison {
    reference: String,
    other: String,
    /// Welch two-tailed t test on within-cluster pair similarities.
    t_test: TestResult,
}

#[derive(Serialize)]
struct VisionEntry {
    name: String,
    #[serde(flatten)]
    summary: VisionSummary,
}

#[derive(Serialize)]
struct Study1Bundle {
    images: usize,
    algorithms: Vec<AlgorithmSummary>,
    comparisons: Vec<Comparison>,
    vision: Vec<VisionEntry>,
}

fn check_names(named: &[Named]) -> CliResult {
    let mut seen = std::collections::HashSet::new();
    for n in named {
        if !seen.insert(slug(&n.name)) {
            return Err(usage(format!("algorithm name {:?} given twice", n.name)));
        }
    }
    Ok(())
}

pub fn report_study1(a: &Study1Report, plots: bool) -> CliResult {
    check_bins(a.bins)?;
    check_realizations(&a.null)?;
    check_names(&a.embeddings)?;
    check_names(&a.block_embeddings)?;
    let images = load_dataset(&a.data)?;
    let ids = image_ids(&images);
    let hists = histograms(&images)?;
    let points = mean_colors(&images)?;
    let out = OutDir::create(&a.out, "report study1", a)?;

    let mut algorithms = Vec::new();
    let mut sims: Vec<(String, SimilarityStats, Vec<usize>)> = Vec::new();
    let mut band = None;
    let mut hist = csv::Writer::from_writer(out.writer("similarity_histogram.csv")?);
    for named in &a.embeddings {
        let suffix = format!("_{}", slug(&named.name));
        let emb = aligned_embeddings(&named.path, &ids)?;
        let model = kmeans(&emb, &a.kmeans.params())?;
        write_cluster(&out, &suffix, &emb, &model)?;
        let (hull, hull_null) = coherence(&points, &model.labels, &a.null)?;
        write_coherence(&out, &suffix, &ids, &points, &model.labels, &hull, &hull_null, plots)?;
        let (stats, sim_null) = similarity(&hists, &model.labels, &a.null)?;
        out.write_with(&format!("similarity_pairs{suffix}.csv"), |w| write_similarity_csv(w, &ids, &stats))?;
        let counts = bin_counts(&stats, a.bins);
        write_histogram_rows(&mut hist, &named.name, &counts).map_err(csv_err)?;
        band.get_or_insert((sim_null.lo95, sim_null.hi95));
        algorithms.push(AlgorithmSummary {
            name: named.name.clone(),
            dim: emb[0].dim(),
            inertia: model.inertia,
            coherence: CoherenceSummary { f: hull.f, null: (&hull_null).into() },
            similarity: SimilaritySummary::new(&stats, &sim_null),
        });
        sims.push((named.name.clone(), stats, counts));
        eprintln!("{}: f={:.4}", named.name, hull.f);
    }
    hist.flush()?;

    let values = |s: &SimilarityStats| s.pairs.iter().map(|p| p.similarity).collect::<Vec<f64>>();
    let reference = values(&sims[0].1);
    let comparisons = sims[1..]
        .iter()
        .map(|(name, stats, _)| {
            Ok(Comparison {
                reference: sims[0].0.clone(),
                other: name.clone(),
                t_test: t_test_two_tailed(&reference, &values(stats))?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    if plots {
        let hs: Vec<Histogram<'_>> = sims
            .iter()
            .map(|(name, stats, counts)| Histogram {
                name,
                fractions: fractions(counts),
                mean: stats.grand_mean.unwrap_or(f64::NAN),
            })
            .collect();
        plots::histograms(&out.path("similarity_histogram.svg"), "within-cluster color similarity", "color similarity", &hs, band)?;
    }

    let mut vision_entries = Vec::new();
    if let Some(blocks) = &a.blocks {
        let block_images = load_dataset(blocks)?;
        let block_ids = image_ids(&block_images);
        let block_hists = histograms(&block_images)?;
        for named in &a.block_embeddings {
            let emb = aligned_embeddings(&named.path, &block_ids)?;
            let v = vision(&block_images, &emb, &block_hists, &a.sampling)?;
            write_vision(&out, &format!("_{}", slug(&named.name)), &named.name, &v, plots)?;
            vision_entries.push(VisionEntry {
                name: named.name.clone(),
                summary: VisionSummary { correlation: v.correlation, asymmetry: v.luminance.asymmetry, excluded: v.excluded },
            });
        }
    }

    out.write_json(
        "report.json",
        &Study1Bundle { images: images.len(), algorithms, comparisons, vision: vision_entries },
    )?;
    println!("report written to {}", out.root().display());
    Ok(())
}
