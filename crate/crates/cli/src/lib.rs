//! Command-line front end. Each subcommand runs one pipeline stage, reads its
//! settings from an optional JSON config overridden by flags, and writes a
//! manifest next to its outputs.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod manifest;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, missing arguments or an invalid config.
    #[error("{0}")]
    Usage(String),
    /// Unreadable input, malformed data or a failing model.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

/// Maps any library error to a data error.
pub(crate) trait OrData<T> {
    fn or_data(self) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> OrData<T> for Result<T, E> {
    fn or_data(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Data(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "codelang", version, about = "Programming-language identification for code snippets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArg {
    /// JSON run config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean a JSONL corpus and drop excluded labels.
    Preprocess {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Comma-separated labels to drop.
        #[arg(long, value_delimiter = ',')]
        exclude: Option<Vec<String>>,
    },
    /// Stratified train/test split into `train.jsonl` and `test.jsonl`.
    Split {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Learn a byte-level BPE vocabulary.
    TrainBpe {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Masked-LM pretraining; `--model` is the tokenizer directory.
    Pretrain {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Fine-tune a pretrained encoder into a classifier.
    Finetune {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Fit the Naive Bayes baseline.
    TrainNb {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Score a classifier directory or a Naive Bayes file on a test corpus.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        report_format: ReportFormat,
    },
    /// Rank labels for one snippet, read from stdin when `--text` is absent.
    Predict {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        text: Option<String>,
    },
    /// Re-render a saved evaluation report.
    Report {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        report_format: ReportFormat,
    },
}

/// Runs one command line against the given streams and returns the exit code.
pub fn run_with<I, T>(argv: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match commands::dispatch(cli.command, stdin, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(err, "run `codelang --help` for usage");
            }
            e.exit_code()
        }
    }
}

/// Runs against the process streams. `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdin().lock(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
