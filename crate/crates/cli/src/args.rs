use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "rankval", version, about = "Rank noisy measurement units by r-value")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the population law by marginal maximum likelihood.
    Fit(FitArgs),
    /// Dump posterior tail probabilities (units x alpha grid).
    Tailprob(TailprobArgs),
    /// Compute r-values.
    Rvalue(RvalueArgs),
    /// Rank units by every method the data supports.
    Rank(RankArgs),
    /// Threshold curves for plotting.
    Curves(CurvesArgs),
    /// Run a Monte-Carlo study.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Normal,
    Binomial,
    Draws,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    Fit,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceFamilyArg {
    Gamma,
    InvGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Grid,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Enrichment,
    Agreement,
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    Mle,
    Pv,
    Pm,
    Per,
    Bf,
    Maxagree,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Unit CSV: `id,x,sigma2`, `id,y,n` or `id,draw_1,...`; with
    /// --draws-matrix, a list of ids.
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    /// Data model; inferred from the header when omitted.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// Matrix of posterior draws: a header row, then one row per id in --in.
    #[arg(long, value_name = "CSV")]
    pub draws_matrix: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PriorArgs {
    /// Fit the θ law to the data, or read it from --prior-file.
    #[arg(long, value_enum, default_value = "fit")]
    pub prior: PriorSource,
    /// Prior JSON: a fitted prior, `{"theta": ..., "variance": ...}` or a bare θ law.
    #[arg(long, value_name = "JSON")]
    pub prior_file: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Number of α grid nodes.
    #[arg(long, default_value_t = 199)]
    pub grid_size: usize,
    /// Gaussian smoothing bandwidth for λ, in grid nodes (0 disables).
    #[arg(long, default_value_t = 5.0)]
    pub smooth_bandwidth: f64,
    /// 0 for a kernel average, 1 or 2 for a local polynomial fit.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub smooth_degree: u8,
    /// Force the smoothed λ curve to be non-decreasing.
    #[arg(long)]
    pub isotonic: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also fit a variance law to the σ² column (normal data).
    #[arg(long, value_enum)]
    pub variance_law: Option<VarianceFamilyArg>,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Run manifest path; defaults to `<out>.manifest.json`.
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TailprobArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 199)]
    pub grid_size: usize,
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Where to write the fitted prior; defaults to `<out>.prior.json`.
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub prior_out: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RvalueArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Table with columns id, rvalue, rank, flags, residual.
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Write the λ curve (alpha, raw, smoothed).
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub dump_lambda: Option<PathBuf>,
    /// Write the V matrix (units x alpha grid).
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub dump_v: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub prior_out: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// How r-values are computed; closed-form needs normal data.
    #[arg(long, value_enum, default_value = "grid")]
    pub route: Route,
    /// Variance law fit for the closed-form route when the prior has none.
    #[arg(long, value_enum, default_value = "gamma")]
    pub variance_law: VarianceFamilyArg,
    /// Benchmark null for the one-sided p-value, on the data scale.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pv_benchmark: f64,
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub prior_out: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CurvesArgs {
    /// Threshold families to emit.
    #[arg(long = "method", value_enum, value_delimiter = ',',
          default_value = "mle,pv,pm,per,bf,maxagree")]
    pub methods: Vec<CurveMethod>,
    /// Standardized variance law: `gamma:SHAPE,RATE`, `inv_gamma:SHAPE,SCALE`
    /// or `point:SIGMA2`.
    #[arg(long, value_name = "SPEC", conflicts_with = "prior_file")]
    pub law: Option<String>,
    /// Prior JSON with a normal θ law and a variance law; curves are then
    /// reported on the data scale.
    #[arg(long, value_name = "JSON")]
    pub prior_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.25")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub sigma2_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub sigma2_max: f64,
    #[arg(long, default_value_t = 100)]
    pub sigma2_points: usize,
    /// Benchmark null for the p-value family, on the output scale.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pv_benchmark: f64,
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub study: Study,
    /// Study configuration JSON.
    #[arg(long, value_name = "JSON")]
    pub config: PathBuf,
    /// Report with columns study, method, alpha_or_t, metric, value, mc_se, seed, setting.
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
}
