//! `langbridge` — operator surface for the cross-lingual routing
//! pipeline: train/evaluate detectors, run query batches, judge and
//! report, run ablations, generate and label data, and drive the
//! simulation world.

mod commands;
mod config;
mod manifest;
mod wiring;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::CommonArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<langbridge::datasets::DatasetError> for CliError {
    fn from(e: langbridge::datasets::DatasetError) -> Self {
        use langbridge::datasets::DatasetError as D;
        match e {
            D::SchemaViolation { .. } | D::UnknownTopic(_) | D::UnparseableGeneration(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<langbridge::detector::DetectorError> for CliError {
    fn from(e: langbridge::detector::DetectorError) -> Self {
        use langbridge::detector::DetectorError as D;
        match e {
            D::EmptyCorpus | D::DegenerateCorpus | D::EmptyTestSet | D::EmptyText
            | D::UnmappedLanguage(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<langbridge::pipeline::PipelineError> for CliError {
    fn from(e: langbridge::pipeline::PipelineError) -> Self {
        use langbridge::pipeline::PipelineError as P;
        match e {
            P::InvalidConfig(_) | P::NoDetectorForLanguage(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<langbridge::evaluation::EvalError> for CliError {
    fn from(e: langbridge::evaluation::EvalError) -> Self {
        use langbridge::evaluation::EvalError as E;
        match e {
            E::EmptySuite => CliError::Config(e.to_string()),
            E::MismatchedQuerySets(_) | E::MissingVerdict(_) | E::MissingGold(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<langbridge::simlab::SimError> for CliError {
    fn from(e: langbridge::simlab::SimError) -> Self {
        match e {
            langbridge::simlab::SimError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<langbridge::backends::BackendError> for CliError {
    fn from(e: langbridge::backends::BackendError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "langbridge",
    version,
    about = "Cross-lingual knowledge routing for LLMs: detect low-resource queries, answer them through a better-resourced language, and measure the gap reduction."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Train a per-language low-resource detector from a labeled corpus.
    DetectorTrain {
        /// Source language the detector serves.
        #[arg(long)]
        lang: String,
        /// Labeled corpus (JSON Lines).
        #[arg(long)]
        corpus: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Training epochs.
        #[arg(long, default_value_t = 12)]
        epochs: u32,
        /// SGD learning rate.
        #[arg(long, default_value_t = 0.5)]
        learning_rate: f64,
        /// Held-out fraction for the post-training report (0 disables).
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Evaluate a trained detector on a labeled corpus.
    DetectorEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Write metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a query batch through the pipeline and write traces.
    PipelineRun {
        /// Queries file (JSON Lines: id, text, lang, gold_answer?, dataset?).
        #[arg(long)]
        queries: PathBuf,
        /// Output traces file (JSON Lines, one trace per query).
        #[arg(long)]
        out: PathBuf,
    },
    /// Judge two trace sets against gold answers and report accuracy,
    /// gaps, and costs.
    Evaluate {
        #[arg(long)]
        queries: PathBuf,
        /// Traces of the baseline condition.
        #[arg(long)]
        original: PathBuf,
        /// Traces of the improved condition.
        #[arg(long)]
        improved: PathBuf,
        /// Report JSON output path.
        #[arg(long)]
        report: PathBuf,
        /// Grader: `exact` (gold containment) or `judge` (LLM judge).
        #[arg(long, default_value = "exact", value_parser = ["exact", "judge"])]
        grader: String,
        /// Print the aligned text table to stdout.
        #[arg(long)]
        table: bool,
        /// Maximum tolerated ambiguous-verdict rate before failing.
        #[arg(long, default_value_t = 0.05)]
        max_ambiguous: f64,
    },
    /// Run ablation conditions on identical queries and compare them.
    Ablate {
        #[arg(long)]
        queries: PathBuf,
        /// Comma-separated conditions: full,no_detector,no_selection.
        #[arg(long, default_value = "full,no_detector,no_selection")]
        suite: String,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "exact", value_parser = ["exact", "judge"])]
        grader: String,
    },
    /// Generate labeled questions for topics via the configured model.
    Datagen {
        /// Topic to generate for; repeatable.
        #[arg(long, required = true)]
        topic: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label records with two model passes; disagreements go to a review
    /// queue, and a resolved queue can be merged back.
    Label {
        /// Unlabeled records (JSON Lines: id, text, lang, ...).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the review queue.
        #[arg(long)]
        queue: PathBuf,
        /// Merge a reviewed queue file instead of labeling.
        #[arg(long)]
        merge: Option<PathBuf>,
    },
    /// Build a simulation world, run conditions, and compare against the
    /// enumeration oracle.
    Simulate {
        /// Facts per class: en-specific,zh-specific,common.
        #[arg(long, default_value = "400,200,400")]
        classes: String,
        /// Extra third-language classes, e.g. `ja=30`; repeatable.
        #[arg(long)]
        extra: Vec<String>,
        /// In-domain wrong-answer probability.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Conditions to run against the direct baseline.
        #[arg(long, alias = "condition", default_value = "full")]
        conditions: String,
        /// Output directory for report.json, report.txt, manifest.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Also serialize the world (facts + corpus) into the output dir.
        #[arg(long)]
        save_world: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DetectorTrain {
            lang,
            corpus,
            out,
            epochs,
            learning_rate,
            holdout,
        } => commands::detector_train(
            &cli.common,
            &lang,
            &corpus,
            &out,
            epochs,
            learning_rate,
            holdout,
        ),
        Command::DetectorEval { model, corpus, out } => {
            commands::detector_eval(&model, &corpus, out.as_deref())
        }
        Command::PipelineRun { queries, out } => {
            commands::pipeline_run(&cli.common, &queries, &out)
        }
        Command::Evaluate {
            queries,
            original,
            improved,
            report,
            grader,
            table,
            max_ambiguous,
        } => commands::evaluate(
            &cli.common,
            &queries,
            &original,
            &improved,
            &report,
            &grader,
            table,
            max_ambiguous,
        ),
        Command::Ablate {
            queries,
            suite,
            report,
            grader,
        } => commands::ablate(&cli.common, &queries, &suite, &report, &grader),
        Command::Datagen { topic, out } => commands::datagen(&cli.common, &topic, &out),
        Command::Label {
            input,
            out,
            queue,
            merge,
        } => commands::label(&cli.common, &input, &out, &queue, merge.as_deref()),
        Command::Simulate {
            classes,
            extra,
            noise,
            conditions,
            out_dir,
            save_world,
        } => commands::simulate(
            &cli.common,
            &classes,
            &extra,
            noise,
            &conditions,
            &out_dir,
            save_world,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
