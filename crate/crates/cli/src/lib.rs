//! The `bbt` command-line tool.
//!
//! Commands: `generate` a synthetic study, `convert` it for early
//! prediction, `train` any of the six learners, `predict` and `evaluate`
//! with a saved model, and `sweep` the subject-count benchmark. Every
//! command is deterministic given its flags and `--seed`, and its output
//! does not depend on `--jobs`.

mod commands;
pub mod config;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};

use bbt_core::Error;

pub use commands::{run, schema_sidecar};

#[derive(Debug, Parser)]
#[command(name = "bbt", version, about = "Bagged boosted trees for longitudinal data")]
pub struct Cli {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat key=value file of flag defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output file, or directory for `sweep`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic EMA study as CSV (plus a schema sidecar).
    Generate(GenerateArgs),
    /// Apply the early-prediction transform to a CSV.
    Convert(ConvertArgs),
    /// Fit a model and save it as JSON.
    Train(TrainArgs),
    /// Write per-record probabilities and labels.
    Predict(PredictArgs),
    /// Report the prediction error of a model on labelled data.
    Evaluate(EvaluateArgs),
    /// Run the subject-count benchmark.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct StudyArgs {
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub obs_per_day: Option<f64>,
    #[arg(long)]
    pub subject_effect_sd: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub numeric: Option<usize>,
    #[arg(long)]
    pub categorical: Option<usize>,
    #[arg(long)]
    pub arity: Option<u32>,
    #[arg(long)]
    pub within_day_correlation: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub subjects: Option<usize>,
    #[command(flatten)]
    pub study: StudyArgs,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Schema JSON (default: `<input>.schema.json`).
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Folds / ensembles `B` (BBT, B&B Combine).
    #[arg(long)]
    pub bags: Option<usize>,
    /// Boosting rounds `M`.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub shrinkage: Option<f64>,
    /// Tree depth (`train`: the chosen learner's trees; `sweep`: boosted trees).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Fraction of rows drawn per boosting round.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Trees in Bagging and Random Forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Features tried per split in Random Forest.
    #[arg(long)]
    pub mtry: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// sct, bagging, boosting, rf, bbcombine or bbt.
    #[arg(long)]
    pub algo: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Pair each record with the label of the next record of the same day.
    #[arg(long)]
    pub early_prediction: bool,
    /// Resample classes so the median rule becomes the q-rule.
    #[arg(long)]
    pub q: Option<f64>,
    /// Jitter sd for replicated numeric features (default: 0.1 × feature sd).
    #[arg(long)]
    pub jitter_sd: Option<f64>,
    #[arg(long)]
    pub max_replication: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Label +1 when the probability is at least this.
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub early_prediction: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated subject counts.
    #[arg(long, value_delimiter = ',')]
    pub subject_counts: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated algorithms (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Train and test on records as observed rather than on next-label pairs.
    #[arg(long)]
    pub no_early_prediction: bool,
    #[command(flatten)]
    pub study: StudyArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Long flag names of every command, the valid config-file keys.
pub fn known_keys() -> BTreeSet<String> {
    let cmd = Cli::command();
    let mut keys = BTreeSet::new();
    let mut add = |c: &clap::Command| {
        for a in c.get_arguments() {
            if let Some(l) = a.get_long() {
                keys.insert(l.to_owned());
            }
        }
    };
    add(&cmd);
    for sub in cmd.get_subcommands() {
        add(sub);
    }
    keys.remove("config");
    keys.remove("help");
    keys.remove("version");
    keys
}

/// Process exit status for an error: 3 for a broken internal invariant,
/// 1 for I/O failures, 2 for everything caused by bad input.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 3,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name), runs the command with
/// reports written to `out` and errors to stderr, and returns the exit code.
pub fn run_args<I, A>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bbt: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
        assert_eq!(exit_code(&Error::usage("x")), 2);
        assert_eq!(
            exit_code(&Error::Parse {
                row: 1,
                message: "x".into()
            }),
            2
        );
        assert_eq!(exit_code(&Error::Integrity("x".into())), 2);
        let io = Error::io("f", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(exit_code(&io), 1);
    }

    #[test]
    fn config_keys_cover_flags() {
        let keys = known_keys();
        for k in [
            "seed",
            "jobs",
            "out",
            "rounds",
            "subject-counts",
            "early-prediction",
            "jitter-sd",
            "days",
        ] {
            assert!(keys.contains(k), "{k}");
        }
        assert!(!keys.contains("config"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
