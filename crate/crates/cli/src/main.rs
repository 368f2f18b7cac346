//! `impshap` command-line front end.

mod commands;
mod report;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impshap::forest::LocalMethod;
use impshap::{GameKind, Impurity};

use report::Format;

#[derive(Debug)]
pub enum CliError {
    Verification(String),
    Usage(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<impshap::Error> for CliError {
    fn from(e: impshap::Error) -> Self {
        match e {
            impshap::Error::Io(m) => CliError::Io(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "impshap",
    version,
    about = "MDI importances, their population values and Shapley games"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Builtin name (led, led-sampled, table1-y1, table1-y2, table2, xor, duplicate,
    /// context, regression) or a CSV path (dataset, or joint table with a final
    /// `probability` column).
    #[arg(long, default_value = "led")]
    pub data: String,
    /// Rows drawn for `led-sampled`.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Quantize numeric columns into this many equal-width bins.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct ForestArgs {
    /// Candidate features per node.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Inclusive range `a..b` or comma list of K values; overrides `--k`.
    #[arg(long)]
    pub k_sweep: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub trees: usize,
    #[arg(long, default_value_t = Impurity::Entropy)]
    pub impurity: Impurity,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file (written atomically); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct InstanceArgs {
    /// CSV of instances (header row, one instance per row, feature columns first).
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Single instance as comma-separated feature values.
    #[arg(long, allow_hyphen_values = true)]
    pub instance: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Global MDI of a forest, optionally across several K.
    Global {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        /// Scale each score vector so absolute values sum to one.
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Local importances (local MDI and/or Saabas) of a forest.
    Local {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long, value_delimiter = ',', default_value = "local-mdi")]
        method: Vec<LocalMethod>,
        /// Class explained by Saabas; the predicted class when absent.
        #[arg(long)]
        class: Option<usize>,
        #[command(flatten)]
        instances: InstanceArgs,
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Saabas attributions (shorthand for `local --method saabas`).
    Saabas {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long)]
        class: Option<usize>,
        #[command(flatten)]
        instances: InstanceArgs,
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact Shapley values of an information or variance game on a joint table.
    Shapley {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "global-info")]
        game: GameKind,
        #[arg(long, allow_hyphen_values = true)]
        instance: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Asymptotic (population) MDI of totally randomized trees.
    PopMdi {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = Impurity::Entropy)]
        impurity: Impurity,
        /// Local importances at this instance instead of global ones.
        #[arg(long, allow_hyphen_values = true)]
        instance: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exhaustive identity suite on a joint table; exit code 1 on any failure.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-K agreement between local MDI and Saabas (absolute scores).
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long)]
        class: Option<usize>,
        #[command(flatten)]
        instances: InstanceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a builtin or loaded dataset (or its joint table) as CSV.
    GenData {
        #[command(flatten)]
        data: DataArgs,
        /// Write the joint probability table instead of the rows.
        #[arg(long)]
        joint: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("IMPSHAP_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("IMPSHAP_THREADS must be a positive integer, got `{raw}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn command_line() -> String {
    let mut parts = vec!["impshap".to_string()];
    for a in std::env::args().skip(1) {
        if a.is_empty() || a.contains(char::is_whitespace) {
            parts.push(format!("'{a}'"));
        } else {
            parts.push(a);
        }
    }
    parts.join(" ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| commands::run(cli.command, command_line()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("impshap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
