//! The `sgdlab` command line.
//!
//! Exit codes: 0 pass, 1 usage error, 2 rate-check failure, 3 inconclusive,
//! 4 divergence.

pub mod commands;
pub mod config;
pub mod experiment;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::oracles::OracleKind;
use crate::rates::{Quantity, Regime};
use crate::schedules::Family;

pub use experiment::{EXIT_DIVERGENCE, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_PASS, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "sgdlab", version, about = "Convergence laboratory for biased SGD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment config and judge its rate checks.
    Run(RunArgs),
    /// Re-judge the rate checks of a config against an existing series.csv.
    Rates(RatesArgs),
    /// Iteration budget for a tolerance and confidence level.
    Budget(BudgetArgs),
    /// Estimate assumption constants of a landscape and oracle.
    Audit(AuditArgs),
    /// Randomized checks of the inequality kernels.
    KernelsSelftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub series: PathBuf,
    /// Write report.json here instead of printing it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum RegimeArg {
    LocalA,
    LocalB,
    Unified,
    Global,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::LocalA => Regime::LocalA,
            RegimeArg::LocalB => Regime::LocalB,
            RegimeArg::Unified => Regime::Unified,
            RegimeArg::Global => Regime::Global,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum QuantityArg {
    MinFGap,
    FGap,
    MinGradSq,
    IterateGap,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::MinFGap => Quantity::MinFGap,
            QuantityArg::FGap => Quantity::FGap,
            QuantityArg::MinGradSq => Quantity::MinGradSq,
            QuantityArg::IterateGap => Quantity::IterateGap,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum FamilyArg {
    Poly,
    PolyLog,
    LogPower,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poly => Family::Poly,
            FamilyArg::PolyLog => Family::PolyLog,
            FamilyArg::LogPower => Family::LogPower,
        }
    }
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    /// Defaults to the largest admissible rho of the schedule.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value = "poly")]
    pub family: FamilyArg,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub cprime: f64,
    #[arg(long, value_enum)]
    pub regime: RegimeArg,
    #[arg(long, value_enum, default_value = "min_f_gap")]
    pub quantity: QuantityArg,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum OracleArg {
    Unbiased,
    ScaledBias,
    MultiplicativeNoise,
    QuantileIndicator,
}

impl From<OracleArg> for OracleKind {
    fn from(o: OracleArg) -> Self {
        match o {
            OracleArg::Unbiased => OracleKind::Unbiased,
            OracleArg::ScaledBias => OracleKind::ScaledBias,
            OracleArg::MultiplicativeNoise => OracleKind::MultiplicativeNoise,
            OracleArg::QuantileIndicator => OracleKind::QuantileIndicator,
        }
    }
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Take landscape and oracle from a config file instead of the flags.
    #[arg(long, conflicts_with_all = ["landscape", "param", "oracle", "noise", "bias_scale"])]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    pub landscape: Option<String>,
    /// Landscape parameter as `key=value`; repeatable.
    #[arg(long, value_parser = parse_param)]
    pub param: Vec<(String, f64)>,
    #[arg(long, value_enum, default_value = "unbiased")]
    pub oracle: OracleArg,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bias_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::audit::DEFAULT_HALF_WIDTH)]
    pub half_width: f64,
    #[arg(long, default_value_t = crate::audit::DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = 20_000)]
    pub n_pairs: usize,
    #[arg(long, default_value_t = 2_000)]
    pub n_points: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_draws: usize,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v = v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random inputs per inequality.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            commands::exit_code_for(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
