use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heavytail_pa::rng::DEFAULT_SEED;

#[derive(Debug, Parser)]
#[command(name = "heavytail-pa", version, about = "Directed preferential attachment: simulation, limit law, tail measures")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "HEAVYTAIL_PA_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grow a graph and write its joint degree counts.
    Simulate(SimulateArgs),
    /// Tabulate the limiting joint pmf p_ij.
    AnalyticPmf(AnalyticPmfArgs),
    /// Draw exact samples of the limiting (in, out) degree pair.
    SampleLimit(SampleLimitArgs),
    /// Evaluate a tail-measure density on a grid.
    Density(DensityArgs),
    /// Angular histogram of standardized extremes of a sample.
    Angular(AngularArgs),
    /// Estimate a marginal tail index from degree counts.
    Estimate(EstimateArgs),
    /// Compare empirical degree counts with the limiting pmf.
    Compare(CompareArgs),
    /// Run a Tauberian diagnostic on the derivative measure.
    Verify(VerifyArgs),
}

/// Model parameters: a key=value file, overridden by individual flags;
/// anything unset falls back to (0.3, 0.5, 0.2, 1, 1).
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta_in: Option<f64>,
    #[arg(long)]
    pub delta_out: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct QuadArgs {
    /// Absolute and relative quadrature tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Subdivision budget of the adaptive quadrature.
    #[arg(long, default_value_t = 10_000)]
    pub max_subdivisions: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Number of edges in the final graph.
    #[arg(long)]
    pub edges: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Independent replicas; replica r uses stream r of the seed and gets
    /// `.r<r>` inserted before the output extensions.
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    /// Binary edge list.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Joint degree counts (columns i, j, N_ij).
    #[arg(long, value_name = "FILE", default_value = "counts.csv")]
    pub counts: PathBuf,
    /// Memory budget for the graph, in bytes.
    #[arg(long, default_value_t = 4 << 30)]
    pub memory_budget: u64,
}

#[derive(Debug, Args)]
pub struct AnalyticPmfArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    /// Largest in-degree; with --jmax unset too, the bound is chosen adaptively.
    #[arg(long)]
    pub imax: Option<u64>,
    #[arg(long)]
    pub jmax: Option<u64>,
    /// Cap on the adaptive bound.
    #[arg(long, default_value_t = 1024)]
    pub max_bound: u64,
    #[arg(long, value_name = "FILE", default_value = "pmf.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleLimitArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_name = "FILE", default_value = "samples.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ComponentArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Combined,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long, value_enum, default_value = "combined")]
    pub component: ComponentArg,
    /// Two grid specs `lo:hi:n` or `lo:hi:n:log`, for x then y.
    #[arg(long, num_args = 2, value_names = ["XSPEC", "YSPEC"], required = true)]
    pub grid: Vec<String>,
    #[arg(long, value_name = "FILE", default_value = "density.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L1,
    L2,
    Max,
}

#[derive(Debug, Args)]
pub struct AngularArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Samples CSV with columns I, O.
    #[arg(long, value_name = "FILE")]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 0.999)]
    pub threshold_quantile: f64,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "l1")]
    pub norm: NormArg,
    #[arg(long, value_name = "FILE", default_value = "angular.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarginArg {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Hill,
    Loglog,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Counts CSV with columns i, j, N_ij.
    #[arg(long, value_name = "FILE")]
    pub counts: PathBuf,
    #[arg(long, value_enum)]
    pub margin: MarginArg,
    #[arg(long, value_enum, default_value = "hill")]
    pub method: MethodArg,
    /// Order statistics for Hill; defaults to the square root of the number
    /// of nodes with positive degree.
    #[arg(long)]
    pub k: Option<usize>,
    /// Smallest degree used by the log-log fit.
    #[arg(long, default_value_t = 10)]
    pub i_min: u64,
    /// Report path; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long, value_name = "FILE")]
    pub counts: PathBuf,
    /// Analytic pmf CSV (columns i, j, p); computed from the parameters when omitted.
    #[arg(long, value_name = "FILE")]
    pub pmf: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub imax: u64,
    #[arg(long, default_value_t = 10)]
    pub jmax: u64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    Uhat,
    Measure,
    Truncation,
    Marginal,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long, value_enum)]
    pub check: CheckArg,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Comma-separated scales t (h for uhat). Defaults: uhat 1e2,1e4,1e6;
    /// measure 1e2,1e3,1e4; truncation and marginal 1e3,1e4,1e5.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// uhat: λ pairs `l1:l2`. Default 1:1,0.5:2,2:0.5.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<String>>,
    /// measure: rectangle corners `x:y`. Default 1:1.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<String>>,
    /// truncation: kernel scales `x1:x2`. Default 1:1.
    #[arg(long)]
    pub x: Option<String>,
    /// truncation: thresholds y. Default 0,1,2,4,8.
    #[arg(long, value_delimiter = ',')]
    pub y_grid: Option<Vec<f64>>,
    /// marginal: arguments x. Default 0.5,1,2.
    #[arg(long, value_delimiter = ',')]
    pub x_grid: Option<Vec<f64>>,
    /// marginal: axis 1 or 2.
    #[arg(long, default_value_t = 1)]
    pub axis: u8,
    /// Pass tolerance. Defaults: uhat 0.05, measure 0.1, truncation 0.01, marginal 0.1.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_name = "FILE", default_value = "report.json")]
    pub out: PathBuf,
}
