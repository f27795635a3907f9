use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "langevin",
    version,
    about = "Strong-order Langevin integrators and convergence experiments"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo runs (defaults to all cores).
    #[arg(long, global = true, env = "LANGEVIN_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupled strong-error experiment; writes errors.csv and report.json.
    Convergence(ConvergenceArgs),
    /// Single trajectory with sampled increments, written as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo check of the increment covariances.
    NoiseCheck(NoiseCheckArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// pendulum, lj7 or harmonic
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, conflicts_with = "kbt")]
    pub sigma: Option<f64>,
    /// Thermal energy; sets sigma = sqrt(2 kbt gamma).
    #[arg(long)]
    pub kbt: Option<f64>,
    /// Harmonic frequency.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Final time T.
    #[arg(long = "t-final", value_parser = parse_real)]
    pub t_final: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    /// Order-3 Taylor on pairs of fine steps.
    Taylor3,
    /// Euler-Maruyama on every fine step.
    Em,
    /// Closed-form solution of a linear model.
    Exact,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated scheme names (default: all).
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Coarse steps, e.g. `2^-4,2^-5,2^-6`.
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub dts: Option<Vec<f64>>,
    /// Fine path step (base step for the exact reference).
    #[arg(long = "ref-dt", value_parser = parse_real)]
    pub ref_dt: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub reference: Option<ReferenceArg>,
    /// Fine steps per order-3 reference step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Experiment configuration as JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub scheme: String,
    #[arg(long, value_parser = parse_real)]
    pub dt: f64,
    /// Number of steps (default: T / dt).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseCheckArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_real, default_value = "1,0.1,0.01")]
    pub dts: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Fine steps per window in quadrature mode.
    #[arg(long, default_value_t = 256)]
    pub ratio: usize,
    /// Failure threshold in standard errors.
    #[arg(long, default_value_t = 4.0)]
    pub threshold: f64,
    /// Write the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub perturb: Option<f64>,
}

/// Real number or a power of two written `2^k` / `2^-k`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('^') {
        Some((base, exp)) => {
            let base: f64 = base.trim().parse().map_err(|_| format!("bad base in `{s}`"))?;
            let exp: i32 = exp.trim().parse().map_err(|_| format!("bad exponent in `{s}`"))?;
            base.powi(exp)
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_two() {
        assert_eq!(parse_real("2^-13").unwrap(), 1.0 / 8192.0);
        assert_eq!(parse_real(" 2^3 ").unwrap(), 8.0);
        assert_eq!(parse_real("0.25").unwrap(), 0.25);
        assert!(parse_real("2^x").is_err());
        assert!(parse_real("abc").is_err());
    }
}
