//! `huewave`: runs the color-perception experiments end to end.
//!
//! Every command writes into `--out`, alongside a `config.json` recording
//! the parameters that produced it. Failures print one JSON line to stderr,
//! `{"error":"usage"|"data","command":...,"message":...}`, and exit with 1
//! (usage) or 2 (data).

mod dataset;
mod output;
mod plots;
mod study1;
mod survey;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::output::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "huewave", version, about = "Perceptually uniform wavelet color embeddings and their evaluation")]
struct Cli {
    /// Worker threads; 0 uses one per core. Outputs do not depend on it.
    #[arg(long, global = true, env = "HUEWAVE_THREADS", default_value_t = 0)]
    threads: usize,
    /// Also render SVG plots next to the CSV outputs.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate single-color block images.
    GenBlocks(dataset::GenBlocks),
    /// Generate two-color stripe images.
    GenStripes(dataset::GenStripes),
    /// Import a directory of image files as a dataset.
    IngestDir(dataset::IngestDir),
    /// Import a CIFAR-10 binary batch as a dataset.
    IngestCifar(dataset::IngestCifar),
    /// Compute wavelet scattering embeddings of a dataset.
    Embed(dataset::Embed),
    /// k-means cluster an embedding file.
    Cluster(study1::Cluster),
    /// Convex-hull color coherence of a clustering.
    Coherence(study1::Coherence),
    /// Within-cluster color similarity of a clustering.
    Similarity(study1::Similarity),
    /// Correlate embedding and color similarity over random image pairs.
    VisionTest(study1::VisionTest),
    /// Select survey tile pairs on which two judges disagree.
    SurveySelect(survey::SurveySelect),
    /// Group survey pairs into comparison sets.
    SurveySets(survey::SurveySets),
    /// Score judges against survey judgments.
    SurveyEval(survey::SurveyEval),
    /// Simulate survey judgments from the JzAzBz distance oracle.
    SurveySynth(survey::SurveySynth),
    /// Principal components of an embedding file and their extreme images.
    PcaExtremes(study1::PcaExtremes),
    /// Aggregate a full study into one bundle.
    #[command(subcommand)]
    Report(Report),
}

#[derive(Subcommand, Debug)]
enum Report {
    /// Clustering coherence, similarity distributions, and the vision test.
    Study1(study1::Study1Report),
    /// Survey accuracy, agreement strength, and perceptual errors.
    Study2(survey::SurveyEval),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenBlocks(_) => "gen-blocks",
            Command::GenStripes(_) => "gen-stripes",
            Command::IngestDir(_) => "ingest-dir",
            Command::IngestCifar(_) => "ingest-cifar",
            Command::Embed(_) => "embed",
            Command::Cluster(_) => "cluster",
            Command::Coherence(_) => "coherence",
            Command::Similarity(_) => "similarity",
            Command::VisionTest(_) => "vision-test",
            Command::SurveySelect(_) => "survey-select",
            Command::SurveySets(_) => "survey-sets",
            Command::SurveyEval(_) => "survey-eval",
            Command::SurveySynth(_) => "survey-synth",
            Command::PcaExtremes(_) => "pca-extremes",
            Command::Report(Report::Study1(_)) => "report study1",
            Command::Report(Report::Study2(_)) => "report study2",
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    let plots = cli.plots;
    match &cli.command {
        Command::GenBlocks(a) => dataset::gen_blocks_cmd(a),
        Command::GenStripes(a) => dataset::gen_stripes_cmd(a),
        Command::IngestDir(a) => dataset::ingest_dir_cmd(a),
        Command::IngestCifar(a) => dataset::ingest_cifar_cmd(a),
        Command::Embed(a) => dataset::embed_cmd(a),
        Command::Cluster(a) => study1::cluster_cmd(a),
        Command::Coherence(a) => study1::coherence_cmd(a, plots),
        Command::Similarity(a) => study1::similarity_cmd(a, plots),
        Command::VisionTest(a) => study1::vision_test_cmd(a, plots),
        Command::SurveySelect(a) => survey::survey_select_cmd(a),
        Command::SurveySets(a) => survey::survey_sets_cmd(a),
        Command::SurveyEval(a) => survey::survey_eval_cmd(a, "survey-eval", plots),
        Command::SurveySynth(a) => survey::survey_synth_cmd(a),
        Command::PcaExtremes(a) => study1::pca_extremes_cmd(a),
        Command::Report(Report::Study1(a)) => study1::report_study1(a, plots),
        Command::Report(Report::Study2(a)) => survey::survey_eval_cmd(a, "report study2", plots),
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    command: Option<&'a str>,
    message: String,
}

fn report_error(kind: &str, command: Option<&str>, message: &str) {
    let message = message.split_whitespace().collect::<Vec<_>>().join(" ");
    let line = ErrorLine { error: kind, command, message };
    eprintln!("{}", serde_json::to_string(&line).expect("error line serializes"));
}

fn fail(e: &CliError, command: Option<&str>) -> ExitCode {
    report_error(e.kind(), command, e.message());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    ExitCode::from(1)
                } else {
                    ExitCode::SUCCESS
                };
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return fail(&CliError::Usage(first.trim_start_matches("error: ").to_string()), None);
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            return fail(&CliError::Usage(format!("thread pool: {e}")), None);
        }
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, Some(cli.command.name())),
    }
}
