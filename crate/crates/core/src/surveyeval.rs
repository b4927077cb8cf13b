//! Color-similarity survey machinery: stimulus selection, comparison sets,
//! and scoring algorithmic judgments against (human or synthetic) votes.
//!
//! A tile pair is two colors; a comparison set shows two tile pairs and
//! asks which pair is more similar. Algorithms judge through
//! [`TileJudge`], so embedding-based and direct color-distance judges are
//! interchangeable.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{average_ranks, cosine_similarity, minmax, proportion_test, spearman, Correlation};
use crate::colormetrics::percentile;
use crate::colorspace::{rgb_to_jzazbz, JzazbzPixel, SrgbPixel};
use crate::{Error, Result};

pub const DEFAULT_DISAGREE: usize = 140;
pub const DEFAULT_BENCHMARK: usize = 60;
pub const DEFAULT_RESPONDENTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::A => "A",
            Choice::B => "B",
        })
    }
}

impl FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Choice::A),
            "B" | "b" => Ok(Choice::B),
            other => Err(Error::Format(format!("choice must be A or B, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePair {
    pub pair_id: String,
    pub tile1: SrgbPixel,
    pub tile2: SrgbPixel,
    pub is_benchmark: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSet {
    pub set_id: String,
    pub pair_a: String,
    pub pair_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub set_id: String,
    pub respondent_id: String,
    pub choice: Choice,
}

/// Similarity of two tile colors under some algorithm; larger is more similar.
pub trait TileJudge {
    fn similarity(&self, a: SrgbPixel, b: SrgbPixel) -> Result<f64>;
}

/// Cosine similarity of per-color embeddings (each tile embedded as a block image).
#[derive(Debug, Clone, Default)]
pub struct EmbeddingJudge {
    vectors: HashMap<SrgbPixel, Vec<f64>>,
}

impl EmbeddingJudge {
    pub fn new(vectors: HashMap<SrgbPixel, Vec<f64>>) -> Self {
        EmbeddingJudge { vectors }
    }

    fn get(&self, c: SrgbPixel) -> Result<&[f64]> {
        self.vectors.get(&c).map(Vec::as_slice).ok_or_else(|| Error::Missing(format!("no embedding for tile {}", c.to_hex())))
    }
}

impl TileJudge for EmbeddingJudge {
    fn similarity(&self, a: SrgbPixel, b: SrgbPixel) -> Result<f64> {
        cosine_similarity(self.get(a)?, self.get(b)?)
    }
}

/// Direct color-space predictor: negated JzAzBz Euclidean distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct JzazbzOracle;

impl TileJudge for JzazbzOracle {
    fn similarity(&self, a: SrgbPixel, b: SrgbPixel) -> Result<f64> {
        Ok(-rgb_to_jzazbz(a).distance(rgb_to_jzazbz(b)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Disagreement pairs first, then benchmark pairs.
    pub pairs: Vec<TilePair>,
    /// Per selected pair, `|rank under A - rank under B|`.
    pub scores: Vec<f64>,
    /// Set when every score was zero and pairs were drawn uniformly instead.
    pub fallback: bool,
}

/// Picks the `n_disagree` candidates whose similarity ranks differ most
/// between the two judges, plus `n_benchmark` drawn uniformly from the
/// lowest-score decile of the remainder (widened to `n_benchmark` entries
/// if the decile is smaller).
pub fn select_stimuli(
    judge_a: &dyn TileJudge,
    judge_b: &dyn TileJudge,
    candidates: &[(SrgbPixel, SrgbPixel)],
    n_disagree: usize,
    n_benchmark: usize,
    seed: u64,
) -> Result<Selection> {
    let need = n_disagree + n_benchmark;
    if candidates.len() < need {
        return Err(Error::InvalidSpec(format!("{} candidate pairs cannot supply {need} stimuli", candidates.len())));
    }
    let sim = |j: &dyn TileJudge| candidates.iter().map(|&(a, b)| j.similarity(a, b)).collect::<Result<Vec<f64>>>();
    let (ra, rb) = (average_ranks(&sim(judge_a)?), average_ranks(&sim(judge_b)?));
    let score: Vec<f64> = ra.iter().zip(&rb).map(|(a, b)| (a - b).abs()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let fallback = score.iter().all(|&s| s == 0.0);
    let (disagree, benchmark): (Vec<usize>, Vec<usize>) = if fallback {
        let picks = index::sample(&mut rng, candidates.len(), need).into_vec();
        (picks[..n_disagree].to_vec(), picks[n_disagree..].to_vec())
    } else {
        let mut by_score: Vec<usize> = (0..candidates.len()).collect();
        // stable: equal scores keep candidate order
        by_score.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
        let disagree = by_score[..n_disagree].to_vec();
        let rest = &by_score[n_disagree..];
        let decile = rest.len().div_ceil(10).max(n_benchmark);
        let pool = &rest[rest.len() - decile..];
        let benchmark = index::sample(&mut rng, pool.len(), n_benchmark).into_iter().map(|i| pool[i]).collect();
        (disagree, benchmark)
    };

    let mut pairs = Vec::with_capacity(need);
    let mut scores = Vec::with_capacity(need);
    for (flag, list) in [(false, &disagree), (true, &benchmark)] {
        for &c in list {
            let (tile1, tile2) = candidates[c];
            pairs.push(TilePair { pair_id: format!("pair_{:03}", pairs.len()), tile1, tile2, is_benchmark: flag });
            scores.push(score[c]);
        }
    }
    Ok(Selection { pairs, scores, fallback })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetMode {
    /// Perfect matching: `n / 2` sets, every pair used once.
    Strict,
    /// Each pair is matched to a distinct partner drawn without
    /// replacement (a random derangement): `n` sets, every pair shown twice.
    Replication,
}

impl FromStr for SetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(SetMode::Strict),
            "replication" => Ok(SetMode::Replication),
            other => Err(Error::InvalidSpec(format!("unknown set mode {other:?}"))),
        }
    }
}

fn derangement(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

pub fn make_sets(pairs: &[TilePair], mode: SetMode, seed: u64) -> Result<Vec<ComparisonSet>> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::InvalidSpec(format!("need at least two pairs, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = |i: usize, a: usize, b: usize| ComparisonSet {
        set_id: format!("set_{i:03}"),
        pair_a: pairs[a].pair_id.clone(),
        pair_b: pairs[b].pair_id.clone(),
    };
    match mode {
        SetMode::Strict => {
            if n % 2 == 1 {
                return Err(Error::InvalidSpec(format!("strict mode needs an even pair count, got {n}")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            Ok(order.chunks_exact(2).enumerate().map(|(i, c)| set(i, c[0], c[1])).collect())
        }
        SetMode::Replication => {
            let partner = derangement(n, &mut rng);
            Ok((0..n).map(|i| set(i, i, partner[i])).collect())
        }
    }
}

/// Number of sets containing zero, one and two benchmark pairs.
pub fn benchmark_composition(sets: &[ComparisonSet], pairs: &PairIndex) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for s in sets {
        out[pairs.benchmark_count(s)?] += 1;
    }
    Ok(out)
}

/// Pair lookup by id.
#[derive(Debug, Clone)]
pub struct PairIndex {
    pairs: HashMap<String, TilePair>,
}

impl PairIndex {
    pub fn new(pairs: &[TilePair]) -> Result<Self> {
        let mut map = HashMap::with_capacity(pairs.len());
        for p in pairs {
            if map.insert(p.pair_id.clone(), p.clone()).is_some() {
                return Err(Error::Format(format!("duplicate pair id {:?}", p.pair_id)));
            }
        }
        Ok(PairIndex { pairs: map })
    }

    pub fn get(&self, id: &str) -> Result<&TilePair> {
        self.pairs.get(id).ok_or_else(|| Error::Missing(format!("unknown pair id {id:?}")))
    }

    fn benchmark_count(&self, s: &ComparisonSet) -> Result<usize> {
        Ok(self.get(&s.pair_a)?.is_benchmark as usize + self.get(&s.pair_b)?.is_benchmark as usize)
    }

    fn is_benchmark_set(&self, s: &ComparisonSet) -> Result<bool> {
        Ok(self.benchmark_count(s)? > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmChoice {
    pub choice: Choice,
    /// Exact similarity tie, resolved toward A.
    pub tie: bool,
}

fn pair_similarity(p: &TilePair, judge: &dyn TileJudge) -> Result<f64> {
    judge.similarity(p.tile1, p.tile2)
}

/// The pair whose tiles the judge finds more similar.
pub fn algorithm_choice(set: &ComparisonSet, pairs: &PairIndex, judge: &dyn TileJudge) -> Result<AlgorithmChoice> {
    let a = pair_similarity(pairs.get(&set.pair_a)?, judge)?;
    let b = pair_similarity(pairs.get(&set.pair_b)?, judge)?;
    Ok(AlgorithmChoice { choice: if b > a { Choice::B } else { Choice::A }, tie: a == b })
}

pub fn algorithm_choices(sets: &[ComparisonSet], pairs: &PairIndex, judge: &dyn TileJudge) -> Result<Vec<AlgorithmChoice>> {
    sets.iter().map(|s| algorithm_choice(s, pairs, judge)).collect()
}

/// A color-blind judge: uniform random choices, seeded.
pub fn random_choices(n: usize, seed: u64) -> Vec<AlgorithmChoice> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| AlgorithmChoice { choice: if rng.gen::<bool>() { Choice::A } else { Choice::B }, tie: false }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMajority {
    pub set_id: String,
    pub choice: Choice,
    /// Fraction of votes for `choice`, in `(0.5, 1]`.
    pub fraction: f64,
    pub votes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajoritySummary {
    /// Index-aligned with the sets; `None` for tied or unvoted sets.
    pub per_set: Vec<Option<SetMajority>>,
    pub ties: usize,
    pub unvoted: usize,
}

impl MajoritySummary {
    pub fn decided(&self) -> usize {
        self.per_set.iter().flatten().count()
    }
}

fn set_positions(sets: &[ComparisonSet]) -> HashMap<&str, usize> {
    sets.iter().enumerate().map(|(i, s)| (s.set_id.as_str(), i)).collect()
}

fn votes_per_set(records: &[JudgmentRecord], sets: &[ComparisonSet]) -> Result<Vec<[usize; 2]>> {
    let pos = set_positions(sets);
    let mut votes = vec![[0usize; 2]; sets.len()];
    for r in records {
        let &i = pos.get(r.set_id.as_str()).ok_or_else(|| Error::Missing(format!("judgment for unknown set {:?}", r.set_id)))?;
        votes[i][r.choice as usize] += 1;
    }
    Ok(votes)
}

/// Modal choice per set. Exact ties and sets without votes are excluded and counted.
pub fn majority_judgments(records: &[JudgmentRecord], sets: &[ComparisonSet]) -> Result<MajoritySummary> {
    let votes = votes_per_set(records, sets)?;
    let (mut ties, mut unvoted) = (0, 0);
    let per_set = sets
        .iter()
        .zip(&votes)
        .map(|(s, &[a, b])| {
            let total = a + b;
            if total == 0 {
                unvoted += 1;
                return None;
            }
            if a == b {
                ties += 1;
                return None;
            }
            let (choice, top) = if a > b { (Choice::A, a) } else { (Choice::B, b) };
            Some(SetMajority { set_id: s.set_id.clone(), choice, fraction: top as f64 / total as f64, votes: total })
        })
        .collect();
    Ok(MajoritySummary { per_set, ties, unvoted })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Majority,
    Individual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    /// Sets containing at least one benchmark pair.
    Benchmark,
    /// Sets containing no benchmark pair.
    NonBenchmark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub level: Level,
    pub subset: Subset,
    pub matches: usize,
    pub trials: usize,
    pub accuracy: f64,
    /// Two-tailed proportion test against 0.5.
    pub p: f64,
}

/// Inputs shared by every accuracy breakdown.
pub struct SurveyData<'a> {
    pub sets: &'a [ComparisonSet],
    pub pairs: &'a PairIndex,
    pub records: &'a [JudgmentRecord],
    pub majority: &'a MajoritySummary,
}

fn in_subset(data: &SurveyData<'_>, i: usize, subset: Subset) -> Result<bool> {
    Ok(match subset {
        Subset::All => true,
        Subset::Benchmark => data.pairs.is_benchmark_set(&data.sets[i])?,
        Subset::NonBenchmark => !data.pairs.is_benchmark_set(&data.sets[i])?,
    })
}

pub fn accuracy(choices: &[AlgorithmChoice], data: &SurveyData<'_>, level: Level, subset: Subset) -> Result<Accuracy> {
    if choices.len() != data.sets.len() {
        return Err(Error::DimensionMismatch { expected: data.sets.len(), got: choices.len() });
    }
    let (mut matches, mut trials) = (0, 0);
    match level {
        Level::Majority => {
            for (i, m) in data.majority.per_set.iter().enumerate() {
                if let Some(m) = m {
                    if in_subset(data, i, subset)? {
                        trials += 1;
                        matches += (choices[i].choice == m.choice) as usize;
                    }
                }
            }
        }
        Level::Individual => {
            let pos = set_positions(data.sets);
            for r in data.records {
                let &i = pos.get(r.set_id.as_str()).ok_or_else(|| Error::Missing(format!("unknown set {:?}", r.set_id)))?;
                if in_subset(data, i, subset)? {
                    trials += 1;
                    matches += (choices[i].choice == r.choice) as usize;
                }
            }
        }
    }
    if trials == 0 {
        return Err(Error::Degenerate(format!("no {level:?} judgments in subset {subset:?}")));
    }
    let p = proportion_test(matches, trials, 0.5)?.p;
    Ok(Accuracy { level, subset, matches, trials, accuracy: matches as f64 / trials as f64, p })
}

/// Every level x subset combination; empty subsets are skipped.
pub fn accuracy_table(choices: &[AlgorithmChoice], data: &SurveyData<'_>) -> Result<Vec<Accuracy>> {
    let mut out = Vec::new();
    for level in [Level::Majority, Level::Individual] {
        for subset in [Subset::All, Subset::Benchmark, Subset::NonBenchmark] {
            match accuracy(choices, data, level, subset) {
                Ok(a) => out.push(a),
                Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub set_id: String,
    /// Judge similarity of the majority pair minus that of the minority pair.
    pub delta: f64,
    pub vote_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStrength {
    pub rows: Vec<AgreementRow>,
    pub correlation: Correlation,
}

/// Spearman correlation, over non-benchmark sets with a majority, between
/// the judge's similarity margin for the majority pair and the majority's
/// vote share.
pub fn agreement_strength_correlation(data: &SurveyData<'_>, judge: &dyn TileJudge) -> Result<AgreementStrength> {
    let mut rows = Vec::new();
    for (i, m) in data.majority.per_set.iter().enumerate() {
        let Some(m) = m else { continue };
        if data.pairs.is_benchmark_set(&data.sets[i])? {
            continue;
        }
        let s = &data.sets[i];
        let a = pair_similarity(data.pairs.get(&s.pair_a)?, judge)?;
        let b = pair_similarity(data.pairs.get(&s.pair_b)?, judge)?;
        let delta = if m.choice == Choice::A { a - b } else { b - a };
        rows.push(AgreementRow { set_id: s.set_id.clone(), delta, vote_fraction: m.fraction });
    }
    if rows.len() < 3 {
        return Err(Error::Degenerate(format!("only {} usable sets for the agreement correlation", rows.len())));
    }
    let d: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let f: Vec<f64> = rows.iter().map(|r| r.vote_fraction).collect();
    Ok(AgreementStrength { correlation: spearman(&d, &f)?, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairColors {
    pub pair_id: String,
    pub tile1: JzazbzPixel,
    pub tile2: JzazbzPixel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptualError {
    pub set_id: String,
    pub algorithm: Choice,
    pub human: Choice,
    pub pair_a: PairColors,
    pub pair_b: PairColors,
}

fn pair_colors(p: &TilePair) -> PairColors {
    PairColors { pair_id: p.pair_id.clone(), tile1: rgb_to_jzazbz(p.tile1), tile2: rgb_to_jzazbz(p.tile2) }
}

/// Sets where the algorithm's choice contradicts the human majority.
pub fn perceptual_error_pairs(
    choices: &[AlgorithmChoice],
    sets: &[ComparisonSet],
    pairs: &PairIndex,
    majority: &MajoritySummary,
) -> Result<Vec<PerceptualError>> {
    if choices.len() != sets.len() {
        return Err(Error::DimensionMismatch { expected: sets.len(), got: choices.len() });
    }
    let mut out = Vec::new();
    for ((s, c), m) in sets.iter().zip(choices).zip(&majority.per_set) {
        if let Some(m) = m {
            if c.choice != m.choice {
                out.push(PerceptualError {
                    set_id: s.set_id.clone(),
                    algorithm: c.choice,
                    human: m.choice,
                    pair_a: pair_colors(pairs.get(&s.pair_a)?),
                    pair_b: pair_colors(pairs.get(&s.pair_b)?),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPoint {
    pub pair_id: String,
    pub embedding_similarity: f64,
    pub jzazbz_similarity: f64,
}

/// Per-pair judge similarity against JzAzBz similarity, both min-max
/// scaled (not ranked).
pub fn similarity_scatter(pairs: &[TilePair], judge: &dyn TileJudge) -> Result<Vec<SimilarityPoint>> {
    let e: Vec<f64> = pairs.iter().map(|p| pair_similarity(p, judge)).collect::<Result<_>>()?;
    let j: Vec<f64> = pairs.iter().map(|p| pair_similarity(p, &JzazbzOracle)).collect::<Result<_>>()?;
    Ok(pairs
        .iter()
        .zip(minmax(&e).into_iter().zip(minmax(&j)))
        .map(|(p, (e, j))| SimilarityPoint { pair_id: p.pair_id.clone(), embedding_similarity: e, jzazbz_similarity: j })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    /// Every respondent picks the oracle's choice.
    Noiseless,
    /// Respondents pick A with probability `1 / (1 + exp(-delta / scale))`,
    /// `delta` being the oracle margin of A over B.
    Logistic { scale: f64 },
}

/// Logistic scale equal to the median absolute oracle margin over the sets,
/// so that a typical set draws a split rather than unanimous vote.
pub fn calibrated_scale(sets: &[ComparisonSet], pairs: &PairIndex, oracle: &dyn TileJudge) -> Result<f64> {
    let mut margins = oracle_margins(sets, pairs, oracle)?.into_iter().map(f64::abs).collect::<Vec<_>>();
    if margins.is_empty() {
        return Err(Error::Degenerate("no sets".into()));
    }
    margins.sort_by(f64::total_cmp);
    let m = percentile(&margins, 50.0);
    if m > 0.0 {
        Ok(m)
    } else {
        Err(Error::Degenerate("all oracle margins are zero".into()))
    }
}

fn oracle_margins(sets: &[ComparisonSet], pairs: &PairIndex, oracle: &dyn TileJudge) -> Result<Vec<f64>> {
    sets.iter()
        .map(|s| Ok(pair_similarity(pairs.get(&s.pair_a)?, oracle)? - pair_similarity(pairs.get(&s.pair_b)?, oracle)?))
        .collect()
}

/// Seeded synthetic votes, `respondents` per set.
pub fn synthetic_judgments(
    sets: &[ComparisonSet],
    pairs: &PairIndex,
    oracle: &dyn TileJudge,
    respondents: usize,
    noise: Noise,
    seed: u64,
) -> Result<Vec<JudgmentRecord>> {
    let margins = oracle_margins(sets, pairs, oracle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sets.len() * respondents);
    for (s, &delta) in sets.iter().zip(&margins) {
        for r in 0..respondents {
            let choice = match noise {
                Noise::Noiseless => {
                    if delta >= 0.0 {
                        Choice::A
                    } else {
                        Choice::B
                    }
                }
                Noise::Logistic { scale } => {
                    let p_a = 1.0 / (1.0 + (-delta / scale).exp());
                    if rng.gen::<f64>() < p_a {
                        Choice::A
                    } else {
                        Choice::B
                    }
                }
            };
            out.push(JudgmentRecord { set_id: s.set_id.clone(), respondent_id: format!("r{r:03}"), choice });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: String,
    pub ties: usize,
    pub accuracies: Vec<Accuracy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Correlation>,
    pub perceptual_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResults {
    pub sets: usize,
    pub majority_ties: usize,
    pub unvoted_sets: usize,
    pub composition: [usize; 3],
    pub algorithms: Vec<AlgorithmReport>,
}

/// Full evaluation of one judge.
pub fn evaluate(name: &str, judge: &dyn TileJudge, data: &SurveyData<'_>) -> Result<AlgorithmReport> {
    let choices = algorithm_choices(data.sets, data.pairs, judge)?;
    let agreement = match agreement_strength_correlation(data, judge) {
        Ok(a) => Some(a.correlation),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(AlgorithmReport {
        algorithm: name.into(),
        ties: choices.iter().filter(|c| c.tie).count(),
        accuracies: accuracy_table(&choices, data)?,
        agreement,
        perceptual_errors: perceptual_error_pairs(&choices, data.sets, data.pairs, data.majority)?.len(),
    })
}

#[derive(Serialize, Deserialize)]
struct StimulusRow {
    pair_id: String,
    tile1_hex: String,
    tile2_hex: String,
    is_benchmark: bool,
}

/// CSV `pair_id,tile1_hex,tile2_hex,is_benchmark`.
pub fn write_stimuli<W: Write>(w: W, pairs: &[TilePair]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in pairs {
        wtr.serialize(StimulusRow {
            pair_id: p.pair_id.clone(),
            tile1_hex: p.tile1.to_hex(),
            tile2_hex: p.tile2.to_hex(),
            is_benchmark: p.is_benchmark,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_stimuli<R: Read>(r: R) -> Result<Vec<TilePair>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: StimulusRow = row?;
        out.push(TilePair {
            pair_id: row.pair_id,
            tile1: SrgbPixel::from_hex(&row.tile1_hex)?,
            tile2: SrgbPixel::from_hex(&row.tile2_hex)?,
            is_benchmark: row.is_benchmark,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct SetRow {
    set_id: String,
    pair_a_id: String,
    pair_b_id: String,
}

/// CSV `set_id,pair_a_id,pair_b_id`.
pub fn write_sets<W: Write>(w: W, sets: &[ComparisonSet]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for s in sets {
        wtr.serialize(SetRow { set_id: s.set_id.clone(), pair_a_id: s.pair_a.clone(), pair_b_id: s.pair_b.clone() })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_sets<R: Read>(r: R) -> Result<Vec<ComparisonSet>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: SetRow = row?;
        if row.pair_a_id == row.pair_b_id {
            return Err(Error::Format(format!("set {:?} compares a pair with itself", row.set_id)));
        }
        if !seen.insert(row.set_id.clone()) {
            return Err(Error::Format(format!("duplicate set id {:?}", row.set_id)));
        }
        out.push(ComparisonSet { set_id: row.set_id, pair_a: row.pair_a_id, pair_b: row.pair_b_id });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JudgmentRow {
    set_id: String,
    respondent_id: String,
    choice: String,
}

/// CSV `set_id,respondent_id,choice`.
pub fn write_judgments<W: Write>(w: W, records: &[JudgmentRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(JudgmentRow { set_id: r.set_id.clone(), respondent_id: r.respondent_id.clone(), choice: r.choice.to_string() })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_judgments<R: Read>(r: R) -> Result<Vec<JudgmentRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| {
            let row: JudgmentRow = row?;
            Ok(JudgmentRecord { set_id: row.set_id, respondent_id: row.respondent_id, choice: row.choice.parse()? })
        })
        .collect()
}
