use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "memloss", version, about = "Experiments with nonstationary intermittent interval maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Return-time tails, one CSV per (k, base).
    Tails(TailsArgs),
    /// Push a density through the first n maps of a sequence.
    Evolve(EvolveArgs),
    /// Total variation between the pushforwards of two densities.
    Memloss(MemlossArgs),
    /// Mass that the pushforward of m_k puts on the reference set.
    Mixing(MixingArgs),
    /// Law of the coupling time S, exact and Monte Carlo.
    Coupling(CouplingArgs),
    /// Frequency of good maps along a sequence.
    Frequency(FrequencyArgs),
    /// Recompute summaries from CSV files written by this tool.
    Summarize(SummarizeArgs),
}

/// A constant sequence from flags, or any sequence from a JSON config.
#[derive(Debug, Args)]
pub struct SeqArgs {
    /// lsv, cui, pikovsky or gh.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Right-branch exponent of the Cui family.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sequence config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit window, lower end.
    #[arg(long)]
    pub fit_min: Option<usize>,
    /// Fit window, upper end.
    #[arg(long)]
    pub fit_max: Option<usize>,
    /// Fail (exit 1) unless every fitted slope is within --tol of this value.
    #[arg(long, allow_hyphen_values = true)]
    pub expect_slope: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TailsArgs {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub common: Common,
    /// m_k or lebesgue; repeatable.
    #[arg(long, default_values_t = vec!["m_k".to_string()])]
    pub base: Vec<String>,
    /// Start index; repeatable.
    #[arg(long, default_values_t = vec![1usize])]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub n_max: usize,
    /// Also estimate each tail by Monte Carlo with this many samples.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1 << 15)]
    pub grid: usize,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// uniform, holder:<exponent>:<cos|sin> or cone:<beta>.
    #[arg(long, default_value = "uniform")]
    pub density: String,
}

#[derive(Debug, Args)]
pub struct MemlossArgs {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1 << 15)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    #[arg(long, default_value = "holder:1:cos")]
    pub f: String,
    #[arg(long, default_value = "holder:0.5:sin")]
    pub g: String,
}

#[derive(Debug, Args)]
pub struct MixingArgs {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1 << 15)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Fail (exit 1) if the minimum mass over n ≥ 2 is below this value.
    #[arg(long)]
    pub expect_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CouplingArgs {
    /// Model config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 500)]
    pub n_max: usize,
    /// Monte Carlo samples; 0 skips the Monte Carlo column.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct FrequencyArgs {
    #[command(flatten)]
    pub seq: SeqArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Maps with gamma ≤ threshold count as good.
    #[arg(long)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_max: usize,
    /// Reference frequency for the deviation profile; defaults to the estimated a.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub fit_min: Option<usize>,
    #[arg(long)]
    pub fit_max: Option<usize>,
}
