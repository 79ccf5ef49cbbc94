use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "mlaudit",
    version,
    about = "Deployment-readiness audits for tabular regression models"
)]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic dataset (CSV plus schema sidecar).
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Cross-validate one model under a single plan.
    Cv(CvArgs),
    /// Contrast random k-fold with grouped cross-validation.
    Contrast(ContrastArgs),
    /// Run a deployment audit.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Permutation importance or Shapley summary of a model.
    Explain(ExplainArgs),
    /// Hyperparameter search; writes the refit winner.
    Tune(TuneArgs),
    /// Render a report as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthCommand {
    Grid(SynthArgs),
    Wall(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Generator spec (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Wall only: correlate every non-physics feature with nu_max.
    #[arg(long)]
    pub nuisance_correlation: Option<f64>,
    /// CSV path; the schema goes next to it as `<stem>.schema.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lm,
    Tree,
    Rf,
    Svr,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    /// Linear models only.
    #[arg(long)]
    pub formula: Option<String>,
    /// Defaults to every schema feature.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Family hyperparameters as a JSON object.
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneOptions {
    /// `none`, `grid` or `random:N`.
    #[arg(long, default_value = "none")]
    pub tune: String,
    /// Re-tune inside every fold instead of once up front.
    #[arg(long)]
    pub nested: bool,
    /// Folds used to score tuning candidates.
    #[arg(long, default_value_t = 5)]
    pub tune_k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub tuning: TuneOptions,
    /// `kfold:K` or `grouped:f1,f2`.
    #[arg(long)]
    pub plan: String,
    /// Grouped plans merge combinations beyond this many folds.
    #[arg(long, default_value_t = mlaudit::validation::DEFAULT_GROUP_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ContrastArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub tuning: TuneOptions,
    #[arg(long, value_delimiter = ',', required = true)]
    pub groups: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = mlaudit::validation::DEFAULT_GROUP_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditCommand {
    /// Physics-only vs all-but-one vs top-k refit.
    Omission(OmissionArgs),
    /// Exhaustive search for near-equivalent feature subsets.
    Underspec(UnderspecArgs),
    /// Fragility verdicts from saved contrast reports.
    Overfit(OverfitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct OmissionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Features the response physically depends on.
    #[arg(long, alias = "features", value_delimiter = ',', required = true)]
    pub physics: Vec<String>,
    #[arg(long)]
    pub omit: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    #[arg(long, default_value_t = 0.10)]
    pub overfit_margin: f64,
    #[arg(long, default_value_t = 0.05)]
    pub compensation_threshold: f64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct UnderspecArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',', default_value = "")]
    pub anchors: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub candidates: Vec<String>,
    #[arg(long)]
    pub subset_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub min_gain: f64,
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    #[arg(long, default_value_t = mlaudit::audits::DEFAULT_SUBSET_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OverfitArgs {
    /// Contrast report documents.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub fragile: f64,
    #[arg(long, default_value_t = 1.5)]
    pub stable: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainMethod {
    Shapley,
    Importance,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(
        long,
        value_enum,
        required_unless_present = "model_file",
        conflicts_with = "model_file"
    )]
    pub model: Option<ModelKind>,
    #[arg(long, requires = "model")]
    pub formula: Option<String>,
    #[arg(long, value_delimiter = ',', requires = "model")]
    pub features: Option<Vec<String>>,
    #[arg(long, requires = "model")]
    pub params: Option<String>,
    /// A fitted model written by `tune --out`.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "shapley")]
    pub method: ExplainMethod,
    /// `rmse` or `r2`.
    #[arg(long, default_value = "rmse")]
    pub metric: String,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = mlaudit::explain::DEFAULT_BACKGROUND)]
    pub background: usize,
    /// Permutations per instance when sampling is needed.
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    /// Rows explained, drawn by seed when the data has more.
    #[arg(long, default_value_t = 100)]
    pub max_rows: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `grid` or `random:N`.
    #[arg(long, default_value = "grid")]
    pub search: String,
    /// Search space as JSON; a family default when omitted.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    /// Where the refit winner is written.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    GroupBoxplot,
    PredScatter,
    ShapBeeswarm,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::GroupBoxplot => "group-boxplot",
            PlotKind::PredScatter => "pred-scatter",
            PlotKind::ShapBeeswarm => "shap-beeswarm",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
}
