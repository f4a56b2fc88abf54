//! `protosel`: select prototypes, cross-validate the ball radius, classify
//! queries and print radius grids from CSV inputs.

mod commands;
mod data;
mod error;
mod model;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use data::InputKind;
use model::{BaseMetric, MetricArg};

#[derive(Debug, Parser)]
#[command(
    name = "protosel",
    version,
    about = "Prototype selection by prize-collecting set cover"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select prototypes on a labeled training set and write the solution document.
    Select(SelectArgs),
    /// Cross-validate over a grid of radii and pick one by the 1-SE rule.
    Cv(CvArgs),
    /// Label query points with a solution written by `select`.
    Classify(ClassifyArgs),
    /// Print radii at quantile levels of the positive training dissimilarities.
    Quantiles(QuantilesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Training CSV file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "features")]
    pub kind: InputKind,
    /// Label column, by header name or 0-based index.
    #[arg(long)]
    pub labels_col: Option<String>,
    /// Defaults to l2 for features and precomputed otherwise.
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Feature metric underneath `--metric rank`.
    #[arg(long, value_enum)]
    pub base_metric: Option<BaseMetric>,
    /// Add this many k-means centroids per class to the candidates.
    #[arg(long)]
    pub kmeans: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Greedy,
    #[value(name = "lp-rounding", alias = "lp_rounding")]
    LpRounding,
}

impl From<SolverArg> for protosel::Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Greedy => protosel::Solver::Greedy,
            SolverArg::LpRounding => protosel::Solver::LpRounding,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A radius, or `q:P` for the P-quantile of positive training dissimilarities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonArg {
    Value(f64),
    Quantile(f64),
}

impl FromStr for EpsilonArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(p) = s.strip_prefix("q:") {
            let p: f64 = p.parse().map_err(|_| format!("bad quantile level '{p}'"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("quantile level {p} outside [0, 1]"));
            }
            return Ok(EpsilonArg::Quantile(p));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(EpsilonArg::Value(v)),
            _ => Err(format!("'{s}' is neither a positive number nor q:P")),
        }
    }
}

/// A per-prototype cost, or `1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaArg(pub Option<f64>);

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "1/n" {
            return Ok(LambdaArg(None));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaArg(Some(v))),
            _ => Err(format!("'{s}' is neither a non-negative number nor 1/n")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Ball radius, or `q:P` for a quantile of the training dissimilarities.
    #[arg(long)]
    pub epsilon: EpsilonArg,
    #[arg(long, default_value = "1/n")]
    pub lambda: LambdaArg,
    #[arg(long, value_enum, default_value = "greedy")]
    pub solver: SolverArg,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the greedy progress trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of quantile levels between the minimum and the median.
    #[arg(long, default_value_t = 20, conflicts_with = "grid_values")]
    pub grid: usize,
    /// Explicit radii instead of a quantile grid.
    #[arg(long, value_delimiter = ',')]
    pub grid_values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value = "1/n")]
    pub lambda: LambdaArg,
    #[arg(long, value_enum, default_value = "greedy")]
    pub solver: SolverArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Solution document written by `select`.
    #[arg(long)]
    pub model: PathBuf,
    /// Feature rows, or dissimilarities to every training point for precomputed models.
    #[arg(long)]
    pub queries: PathBuf,
    /// Defaults to what the model was fitted on.
    #[arg(long, value_enum)]
    pub kind: Option<InputKind>,
    /// True labels of the queries, to report error and confusion.
    #[arg(long)]
    pub labels_col: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct QuantilesArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 20, conflicts_with = "probs")]
    pub grid: usize,
    /// Explicit quantile levels.
    #[arg(long, value_delimiter = ',')]
    pub probs: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = commands::run(cli) {
        eprintln!("protosel: {e}");
        std::process::exit(e.exit_code());
    }
}
