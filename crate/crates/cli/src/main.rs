//! `agentuq`: load scenarios, enumerate or sample trajectories, and report
//! their uncertainty.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use agentuq::UqError;

#[derive(Debug, Parser)]
#[command(
    name = "agentuq",
    version,
    about = "Trajectory-level uncertainty for finite agent systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true, conflicts_with = "builtin")]
    pub scenario: Option<PathBuf>,

    /// Built-in scenario: mini-booking, deterministic or uniform-2turn.
    #[arg(long, global = true)]
    pub builtin: Option<String>,

    /// Comma-separated aggregators: exact, gated, sum, max, average, tail, top_k.
    #[arg(long, global = true, value_delimiter = ',')]
    pub aggregators: Option<Vec<String>>,

    /// shannon, renyi:<alpha>, tsallis:<q> or ie.
    #[arg(long, global = true, default_value = "shannon")]
    pub measure: String,

    #[arg(long, global = true, value_enum, default_value_t = RunMode::Exact)]
    pub mode: RunMode,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub samples: Option<usize>,

    /// Shorten the scenario's horizon.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Display units for logarithmic quantities.
    #[arg(long, global = true, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a scenario and print a summary.
    Validate,
    /// Draw seeded trajectories.
    Sample,
    /// List every trajectory with its probability.
    Enumerate,
    /// Per-turn decomposition and aggregate totals.
    Report,
    /// Run the bound suite and the reward-ordering check.
    Check {
        /// Number of random systems in the bound suite.
        #[arg(long, default_value_t = 1000)]
        systems: usize,
        /// Replace the gate's information gain with its negation.
        #[arg(long, hide = true)]
        corrupt_gate: bool,
    },
    /// Tabulate a parametric measure over a grid.
    Sweep {
        #[arg(long, value_enum)]
        parameter: SweepParameter,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        grid: Vec<f64>,
        /// Sweep a single distribution instead of a scenario.
        #[arg(long, value_delimiter = ',')]
        dist: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParameter {
    Alpha,
    Q,
}

/// A failed command: exit code, machine code and message.
#[derive(Debug)]
pub struct Failure {
    pub exit: u8,
    pub code: &'static str,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            exit: 2,
            code: "E_CONFIG",
            message: message.into(),
        }
    }
}

impl From<UqError> for Failure {
    fn from(e: UqError) -> Self {
        let (exit, code) = match &e {
            UqError::Config(_) => (2, "E_CONFIG"),
            UqError::Parse(_) => (2, "E_PARSE"),
            UqError::Io(_) => (2, "E_IO"),
            UqError::Parameter(_) => (2, "E_PARAM"),
            UqError::Validation(_) => (2, "E_VALIDATION"),
            UqError::Degenerate(_) => (2, "E_DEGENERATE"),
            UqError::EnumerationCap { .. } => (3, "E_ENUM_CAP"),
            _ => (1, "E_INTERNAL"),
        };
        Self {
            exit,
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}
