//! Survey stimulus selection, comparison sets, and judgment evaluation.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use huewave::analysis::{two_sample_proportion_test, TestResult};
use huewave::surveyeval::{
    agreement_strength_correlation, algorithm_choices, benchmark_composition, calibrated_scale, evaluate, make_sets,
    majority_judgments, perceptual_error_pairs, read_judgments, read_sets, read_stimuli, select_stimuli,
    similarity_scatter, synthetic_judgments, write_judgments, write_sets, write_stimuli, Accuracy, ComparisonSet,
    EmbeddingJudge, JudgmentRecord, JzazbzOracle, Level, Noise, PairIndex, SetMode, Subset, SurveyData, SurveyResults,
    TileJudge, TilePair, DEFAULT_BENCHMARK, DEFAULT_DISAGREE, DEFAULT_RESPONDENTS,
};
use huewave::SrgbPixel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{
    aligned_embeddings, data, image_ids, load_dataset, parse_named, slug, usage, CliError, CliResult, Named, OutDir,
};
use crate::plots::{self, Series};

pub const ORACLE_NAME: &str = "jzazbz-oracle";

/// A tile-similarity judge given on the command line: `oracle` or `NAME=FILE`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum JudgeSpec {
    Oracle(String),
    Embeddings(Named),
}

impl JudgeSpec {
    fn name(&self) -> &str {
        match self {
            JudgeSpec::Oracle(_) => ORACLE_NAME,
            JudgeSpec::Embeddings(n) => &n.name,
        }
    }
}

pub fn parse_judge(s: &str) -> Result<JudgeSpec, String> {
    if s == "oracle" {
        Ok(JudgeSpec::Oracle(s.into()))
    } else {
        parse_named(s).map(JudgeSpec::Embeddings)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SurveySelect {
    /// Block dataset whose embeddings define the tile judges.
    #[arg(long)]
    pub data: PathBuf,
    /// First judge: `NAME=FILE` (embeddings of `--data`) or `oracle`.
    #[arg(long, value_parser = parse_judge)]
    pub judge_a: JudgeSpec,
    #[arg(long, value_parser = parse_judge)]
    pub judge_b: JudgeSpec,
    /// Random candidate pairs to draw; 0 uses every pair of distinct colors
    /// present in the dataset.
    #[arg(long, default_value_t = 0)]
    pub candidates: usize,
    #[arg(long, default_value_t = DEFAULT_DISAGREE)]
    pub disagree: usize,
    #[arg(long, default_value_t = DEFAULT_BENCHMARK)]
    pub benchmark: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SurveySets {
    #[arg(long)]
    pub stimuli: PathBuf,
    /// `strict` (every pair once) or `replication` (every pair twice).
    #[arg(long, default_value = "replication")]
    pub mode: SetMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SurveySynth {
    #[arg(long)]
    pub stimuli: PathBuf,
    #[arg(long)]
    pub sets: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RESPONDENTS)]
    pub respondents: usize,
    /// `noiseless` or `logistic`.
    #[arg(long, default_value = "logistic")]
    pub noise: String,
    /// Logistic scale; defaults to the median absolute oracle margin.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SurveyEval {
    #[arg(long)]
    pub stimuli: PathBuf,
    #[arg(long)]
    pub sets: PathBuf,
    /// `set_id,respondent_id,choice` CSV.
    #[arg(long)]
    pub judgments: PathBuf,
    /// Block dataset the `--judge` embeddings were computed on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `NAME=FILE`, repeatable; the JzAzBz oracle is always evaluated too.
    #[arg(long = "judge", value_parser = parse_named, requires = "data")]
    pub judges: Vec<Named>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Cosine judge over per-color embeddings of a block dataset.
fn embedding_judge(data_dir: &Path, embeddings: &Path) -> CliResult<EmbeddingJudge> {
    let images = load_dataset(data_dir)?;
    let emb = aligned_embeddings(embeddings, &image_ids(&images))?;
    let mut vectors = HashMap::new();
    for (img, e) in images.iter().zip(emb) {
        let color = img.central_color().ok_or_else(|| data(format!("image {:?} has an empty central region", img.id)))?;
        vectors.entry(color).or_insert(e.vector);
    }
    Ok(EmbeddingJudge::new(vectors))
}

fn build_judge(spec: &JudgeSpec, data_dir: &Path) -> CliResult<Box<dyn TileJudge>> {
    Ok(match spec {
        JudgeSpec::Oracle(_) => Box::new(JzazbzOracle),
        JudgeSpec::Embeddings(n) => Box::new(embedding_judge(data_dir, &n.path)?),
    })
}

fn dataset_colors(data_dir: &Path) -> CliResult<Vec<SrgbPixel>> {
    let mut colors: Vec<SrgbPixel> = load_dataset(data_dir)?.iter().filter_map(|i| i.central_color()).collect();
    colors.sort_by_key(|c| c.channels());
    colors.dedup();
    Ok(colors)
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    pair_id: &'a str,
    rank_gap: f64,
}

#[derive(Serialize)]
struct SelectionSummary<'a> {
    judge_a: &'a str,
    judge_b: &'a str,
    candidates: usize,
    fallback: bool,
}

pub fn survey_select_cmd(a: &SurveySelect) -> CliResult {
    let colors = dataset_colors(&a.data)?;
    let mut candidates = Vec::new();
    for (i, &x) in colors.iter().enumerate() {
        for &y in &colors[i + 1..] {
            candidates.push((x, y));
        }
    }
    if a.candidates > 0 {
        if a.candidates > candidates.len() {
            return Err(usage(format!("--candidates {} exceeds the {} available color pairs", a.candidates, candidates.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        candidates.shuffle(&mut rng);
        candidates.truncate(a.candidates);
    }
    let judge_a = build_judge(&a.judge_a, &a.data)?;
    let judge_b = build_judge(&a.judge_b, &a.data)?;
    let sel = select_stimuli(judge_a.as_ref(), judge_b.as_ref(), &candidates, a.disagree, a.benchmark, a.seed)?;
    let out = OutDir::create(&a.out, "survey-select", a)?;
    out.write_with("stimuli.csv", |w| write_stimuli(w, &sel.pairs))?;
    let mut w = csv::Writer::from_writer(out.writer("selection_scores.csv")?);
    for (p, &s) in sel.pairs.iter().zip(&sel.scores) {
        w.serialize(ScoreRow { pair_id: &p.pair_id, rank_gap: s }).map_err(|e| data(e.to_string()))?;
    }
    w.flush()?;
    out.write_json(
        "selection.json",
        &SelectionSummary { judge_a: a.judge_a.name(), judge_b: a.judge_b.name(), candidates: candidates.len(), fallback: sel.fallback },
    )?;
    if sel.fallback {
        eprintln!("warning: the judges agree on every candidate; disagreement pairs were drawn uniformly");
    }
    println!("selected {} pairs from {} candidates", sel.pairs.len(), candidates.len());
    Ok(())
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn context(path: &Path) -> impl Fn(huewave::Error) -> CliError + '_ {
    move |e| data(format!("{}: {e}", path.display()))
}

fn load_stimuli(path: &Path) -> CliResult<Vec<TilePair>> {
    read_stimuli(open(path)?).map_err(context(path))
}

fn load_sets(path: &Path) -> CliResult<Vec<ComparisonSet>> {
    read_sets(open(path)?).map_err(context(path))
}

fn load_judgments(path: &Path) -> CliResult<Vec<JudgmentRecord>> {
    read_judgments(open(path)?).map_err(context(path))
}

pub fn survey_sets_cmd(a: &SurveySets) -> CliResult {
    let pairs = load_stimuli(&a.stimuli)?;
    let sets = make_sets(&pairs, a.mode, a.seed)?;
    let out = OutDir::create(&a.out, "survey-sets", a)?;
    out.write_with("sets.csv", |w| write_sets(w, &sets))?;
    let idx = PairIndex::new(&pairs)?;
    let [zero, one, two] = benchmark_composition(&sets, &idx)?;
    println!("{} sets; benchmark pairs per set: 0={zero} 1={one} 2={two}", sets.len());
    Ok(())
}

pub fn survey_synth_cmd(a: &SurveySynth) -> CliResult {
    let pairs = load_stimuli(&a.stimuli)?;
    let sets = load_sets(&a.sets)?;
    let idx = PairIndex::new(&pairs).map_err(context(&a.stimuli))?;
    let noise = match a.noise.as_str() {
        "noiseless" => Noise::Noiseless,
        "logistic" => {
            let scale = match a.scale {
                Some(s) if s > 0.0 && s.is_finite() => s,
                Some(s) => return Err(usage(format!("--scale must be positive, got {s}"))),
                None => calibrated_scale(&sets, &idx, &JzazbzOracle)?,
            };
            Noise::Logistic { scale }
        }
        other => return Err(usage(format!("--noise must be noiseless or logistic, got {other:?}"))),
    };
    if a.respondents == 0 {
        return Err(usage("--respondents must be positive"));
    }
    let records = synthetic_judgments(&sets, &idx, &JzazbzOracle, a.respondents, noise, a.seed)?;
    let out = OutDir::create(&a.out, "survey-synth", a)?;
    out.write_with("judgments.csv", |w| write_judgments(w, &records))?;
    out.write_json("noise.json", &noise)?;
    println!("{} judgments over {} sets", records.len(), sets.len());
    Ok(())
}

#[derive(Serialize)]
struct AccuracyRow<'a> {
    algorithm: &'a str,
    level: Level,
    subset: Subset,
    matches: usize,
    trials: usize,
    accuracy: f64,
    p: f64,
}

impl<'a> AccuracyRow<'a> {
    fn new(algorithm: &'a str, a: &Accuracy) -> Self {
        AccuracyRow { algorithm, level: a.level, subset: a.subset, matches: a.matches, trials: a.trials, accuracy: a.accuracy, p: a.p }
    }
}

#[derive(Serialize)]
struct MajorityRow<'a> {
    set_id: &'a str,
    choice: String,
    fraction: Option<f64>,
    votes: Option<usize>,
}

#[derive(Serialize)]
struct ErrorRow<'a> {
    set_id: &'a str,
    algorithm_choice: String,
    human_choice: String,
    pair_a: &'a str,
    pair_a_jz1: f64,
    pair_a_jz2: f64,
    pair_b: &'a str,
    pair_b_jz1: f64,
    pair_b_jz2: f64,
}

#[derive(Serialize)]
struct AccuracyComparison {
    reference: String,
    other: String,
    level: Level,
    test: TestResult,
}

#[derive(Serialize)]
struct Study2Bundle<'a> {
    #[serde(flatten)]
    results: &'a SurveyResults,
    comparisons: Vec<AccuracyComparison>,
}

fn majority_accuracy(accs: &[Accuracy], level: Level) -> Option<&Accuracy> {
    accs.iter().find(|x| x.level == level && x.subset == Subset::All)
}

pub fn survey_eval_cmd(a: &SurveyEval, command: &str, plots: bool) -> CliResult {
    let pairs = load_stimuli(&a.stimuli)?;
    let sets = load_sets(&a.sets)?;
    let records = load_judgments(&a.judgments)?;
    let idx = PairIndex::new(&pairs).map_err(context(&a.stimuli))?;
    let majority = majority_judgments(&records, &sets)?;
    let survey = SurveyData { sets: &sets, pairs: &idx, records: &records, majority: &majority };

    let mut judges: Vec<(String, Box<dyn TileJudge>)> = Vec::new();
    for n in &a.judges {
        if n.name == ORACLE_NAME || judges.iter().any(|(j, _)| slug(j) == slug(&n.name)) {
            return Err(usage(format!("judge name {:?} given twice or reserved", n.name)));
        }
        let dir = a.data.as_deref().ok_or_else(|| usage("--judge requires --data"))?;
        judges.push((n.name.clone(), Box::new(embedding_judge(dir, &n.path)?)));
    }
    judges.push((ORACLE_NAME.into(), Box::new(JzazbzOracle)));

    let out = OutDir::create(&a.out, command, a)?;
    let mut reports = Vec::new();
    let mut acc_csv = csv::Writer::from_writer(out.writer("accuracy.csv")?);
    for (name, judge) in &judges {
        let judge = judge.as_ref();
        let report = evaluate(name, judge, &survey)?;
        for acc in &report.accuracies {
            acc_csv.serialize(AccuracyRow::new(name, acc)).map_err(|e| data(e.to_string()))?;
        }
        write_judge_details(&out, name, judge, &survey, plots)?;
        reports.push(report);
    }
    acc_csv.flush()?;

    let mut w = csv::Writer::from_writer(out.writer("majority.csv")?);
    for (s, m) in sets.iter().zip(&majority.per_set) {
        w.serialize(MajorityRow {
            set_id: &s.set_id,
            choice: m.as_ref().map_or_else(String::new, |m| m.choice.to_string()),
            fraction: m.as_ref().map(|m| m.fraction),
            votes: m.as_ref().map(|m| m.votes),
        })
        .map_err(|e| data(e.to_string()))?;
    }
    w.flush()?;

    let mut comparisons = Vec::new();
    for level in [Level::Majority, Level::Individual] {
        let Some(reference) = majority_accuracy(&reports[0].accuracies, level) else { continue };
        for other in &reports[1..] {
            if let Some(o) = majority_accuracy(&other.accuracies, level) {
                comparisons.push(AccuracyComparison {
                    reference: reports[0].algorithm.clone(),
                    other: other.algorithm.clone(),
                    level,
                    test: two_sample_proportion_test(reference.matches, reference.trials, o.matches, o.trials)?,
                });
            }
        }
    }

    let results = SurveyResults {
        sets: sets.len(),
        majority_ties: majority.ties,
        unvoted_sets: majority.unvoted,
        composition: benchmark_composition(&sets, &idx)?,
        algorithms: reports,
    };
    out.write_json("results.json", &Study2Bundle { results: &results, comparisons })?;
    for r in &results.algorithms {
        if let Some(m) = majority_accuracy(&r.accuracies, Level::Majority) {
            println!("{}: majority accuracy {:.3} ({}/{}, p={:.3e})", r.algorithm, m.accuracy, m.matches, m.trials, m.p);
        }
    }
    Ok(())
}

fn write_judge_details(out: &OutDir, name: &str, judge: &dyn TileJudge, survey: &SurveyData<'_>, plots: bool) -> CliResult {
    let s = slug(name);
    let csv_err = |e: csv::Error| data(e.to_string());

    let agreement = match agreement_strength_correlation(survey, judge) {
        Ok(a) => Some(a),
        Err(huewave::Error::Degenerate(_)) => None,
        Err(e) => return Err(e.into()),
    };
    if let Some(agr) = &agreement {
        let mut w = csv::Writer::from_writer(out.writer(&format!("agreement_{s}.csv"))?);
        for r in &agr.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
    }

    let pairs: Vec<TilePair> = survey.sets.iter().flat_map(|set| [&set.pair_a, &set.pair_b]).map(|id| survey.pairs.get(id).cloned()).collect::<huewave::Result<_>>()?;
    let mut seen = std::collections::HashSet::new();
    let pairs: Vec<TilePair> = pairs.into_iter().filter(|p| seen.insert(p.pair_id.clone())).collect();
    let scatter = similarity_scatter(&pairs, judge)?;
    let mut w = csv::Writer::from_writer(out.writer(&format!("scatter_{s}.csv"))?);
    for p in &scatter {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;

    let choices = algorithm_choices(survey.sets, survey.pairs, judge)?;
    let errors = perceptual_error_pairs(&choices, survey.sets, survey.pairs, survey.majority)?;
    let mut w = csv::Writer::from_writer(out.writer(&format!("errors_{s}.csv"))?);
    for e in &errors {
        w.serialize(ErrorRow {
            set_id: &e.set_id,
            algorithm_choice: e.algorithm.to_string(),
            human_choice: e.human.to_string(),
            pair_a: &e.pair_a.pair_id,
            pair_a_jz1: e.pair_a.tile1.jz,
            pair_a_jz2: e.pair_a.tile2.jz,
            pair_b: &e.pair_b.pair_id,
            pair_b_jz1: e.pair_b.tile1.jz,
            pair_b_jz2: e.pair_b.tile2.jz,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;

    if plots {
        if let Some(agr) = &agreement {
            plots::scatter(
                &out.path(&format!("agreement_{s}.svg")),
                &format!("{name}: rho = {:.3}, p = {:.2e}", agr.correlation.rho, agr.correlation.p),
                ("similarity margin of majority pair", "majority vote share"),
                &[Series { name, points: agr.rows.iter().map(|r| (r.delta, r.vote_fraction)).collect() }],
                false,
            )?;
        }
        plots::scatter(
            &out.path(&format!("scatter_{s}.svg")),
            &format!("{name}: survey pairs"),
            ("JzAzBz similarity (minmax)", "judge similarity (minmax)"),
            &[Series { name, points: scatter.iter().map(|p| (p.jzazbz_similarity, p.embedding_similarity)).collect() }],
            true,
        )?;
    }
    Ok(())
}
