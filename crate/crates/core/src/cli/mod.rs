//! The `xim` command-line tool.

mod commands;
pub mod plot;
pub mod settings;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::XimError;

pub use settings::Settings;

/// Error classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Internal = 1,
    Config = 2,
    Data = 3,
    Dimension = 4,
    PlotDimension = 5,
    Model = 6,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<XimError> for CliError {
    fn from(e: XimError) -> Self {
        let kind = match &e {
            XimError::Config(_) | XimError::Unsupported(_) => ExitKind::Config,
            XimError::Parse { .. } | XimError::Structure(_) | XimError::Domain(_) | XimError::Degenerate(_) => {
                ExitKind::Data
            }
            XimError::Shape { .. } => ExitKind::Dimension,
            XimError::Model(_) => ExitKind::Model,
            XimError::Io { .. } => ExitKind::Internal,
        };
        CliError::new(kind, e.to_string())
    }
}

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  internal or output i/o error
  2  invalid configuration or arguments (the message names the key)
  3  unreadable or malformed data, including a missing data file
  4  dimension mismatch between model and data
  5  plot input is not 2-dimensional
  6  missing, malformed or incompatible model file";

#[derive(Debug, Parser)]
#[command(
    name = "xim",
    version,
    about = "Exploratory Inspection Machine: topographic embeddings of high-dimensional data",
    after_help = EXIT_CODES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by commands that read a run configuration.
/// Precedence: command-line flags, then `--set`, then the config file,
/// then built-in defaults.
#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Config file of key=value lines ('#' starts a comment)
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Override a config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed for all random streams
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with a training log
    #[command(after_help = EXIT_CODES)]
    Train {
        /// Data file (rows are samples)
        #[arg(long, short = 'd')]
        data: PathBuf,
        /// Model file to write
        #[arg(long, short = 'o')]
        output: PathBuf,
        /// Training log (default: model path with `.log` appended)
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Map data through a trained model
    #[command(after_help = EXIT_CODES)]
    Embed {
        #[arg(long, short = 'm')]
        model: PathBuf,
        #[arg(long, short = 'd')]
        data: PathBuf,
        /// Embedding file to write
        #[arg(long, short = 'o')]
        output: PathBuf,
        /// Shepard interpolation power
        #[arg(long)]
        power: Option<f64>,
        /// Interpolate from the q nearest references only
        #[arg(long)]
        top_q: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare methods by repeated subsampling
    #[command(after_help = EXIT_CODES)]
    Evaluate {
        #[arg(long, short = 'd')]
        data: PathBuf,
        /// Human-readable table to write
        #[arg(long, short = 'o')]
        output: PathBuf,
        /// Machine-readable report (default: table path with `.machine` appended)
        #[arg(long)]
        machine: Option<PathBuf>,
        /// Comma-separated methods
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        fraction: Option<f64>,
        /// Neighborhood sizes, `LO..HI` or a single k
        #[arg(long)]
        k: Option<String>,
        /// Evaluate every listed value of a key, e.g. `sigma_end=0.25|0.5`;
        /// repeatable, combinations are crossed
        #[arg(long, value_name = "KEY=V1|V2|...")]
        grid: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Draw a 2-D embedding as an SVG scatter plot
    #[command(after_help = EXIT_CODES)]
    Plot {
        #[arg(long, short = 'e')]
        embedding: PathBuf,
        /// SVG file to write
        #[arg(long, short = 'o')]
        output: PathBuf,
        /// One integer label per line, overriding labels in the embedding
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value = "")]
        title: String,
    },
    /// Write labeled Gaussian clusters
    #[command(after_help = EXIT_CODES)]
    Synth {
        /// Total sample count; must equal the sum of the cluster sizes
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 79)]
        dims: usize,
        /// Comma-separated cluster sizes
        #[arg(long, default_value = "22,125")]
        clusters: String,
        /// Distance between cluster centres in noise standard deviations
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: standard output)
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// List every config key with its default
    Keys,
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitKind::Config.code())
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.code())
        }
    }
}
