use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ergo", version, about = "Convergence-rate bounds for ergodic Markov models, with numerical checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form bounds only.
    Bounds(BoundsArgs),
    /// Bounds plus finite-state oracles on a truncated or discretized generator.
    Verify(VerifyArgs),
    /// Monte Carlo hitting times compared against solves and bounds.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model document (JSON).
    pub model: PathBuf,
    #[arg(long)]
    pub tol_rel: Option<f64>,
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Externally known lower bound on lambda1 (single-death and stable models).
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Level r for stable-driven SDEs (must exceed 1) and radial models.
    #[arg(long, default_value_t = 2.0)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of states kept for chain models.
    #[arg(long)]
    pub truncate: Option<usize>,
    /// Mesh width for diffusions.
    #[arg(long)]
    pub mesh: Option<f64>,
    /// Domain length for diffusions.
    #[arg(long)]
    pub length: Option<f64>,
    /// Time grid: comma list or `geom:a:b:n`.
    #[arg(long, value_parser = parse_times)]
    pub times: Option<Times>,
    /// Target set: `0`, `0..3` or `0,2,5` for chains; a level `r` for diffusions.
    #[arg(long)]
    pub hit: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, env = "ERGO_SEED", default_value_t = 0x5eed)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub streams: usize,
    /// Target set, as for `verify`.
    #[arg(long)]
    pub hit: Option<String>,
    /// Starting state (chains) or position (diffusions).
    #[arg(long)]
    pub start: Option<f64>,
    /// Also estimate `E exp(beta tau)`.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    /// Euler step for diffusions.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// States kept for the linear-solve reference.
    #[arg(long)]
    pub truncate: Option<usize>,
    #[arg(long)]
    pub mesh: Option<f64>,
    #[arg(long)]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Times(pub Vec<f64>);

pub fn parse_times(s: &str) -> Result<Times, String> {
    let bad = |what: &str| format!("bad time grid `{s}`: {what}");
    let v = if let Some(rest) = s.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(bad("expected geom:a:b:n"));
        };
        let a: f64 = a.parse().map_err(|_| bad("a is not a number"))?;
        let b: f64 = b.parse().map_err(|_| bad("b is not a number"))?;
        let n: usize = n.parse().map_err(|_| bad("n is not an integer"))?;
        if !(a > 0.0 && b > a) || n < 2 {
            return Err(bad("need 0 < a < b and n >= 2"));
        }
        let ratio = (b / a).powf(1.0 / (n - 1) as f64);
        (0..n).map(|k| if k + 1 == n { b } else { a * ratio.powi(k as i32) }).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad(&format!("`{t}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    if v.is_empty() || v.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(bad("times must be finite and >= 0"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("times must increase"));
    }
    Ok(Times(v))
}

/// Chain target sets: `k`, `a..b` (inclusive) or a comma list.
pub fn parse_states(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("bad target set `{s}`: expected `k`, `a..b` or `i,j,k`");
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grids() {
        assert_eq!(parse_times("0.5, 1,2").unwrap().0, vec![0.5, 1.0, 2.0]);
        let g = parse_times("geom:1:8:4").unwrap().0;
        assert_eq!(g.len(), 4);
        assert!((g[1] - 2.0).abs() < 1e-12 && g[3] == 8.0);
        assert!(parse_times("geom:0:1:3").is_err());
        assert!(parse_times("2,1").is_err());
        assert!(parse_times("x").is_err());
    }

    #[test]
    fn state_sets() {
        assert_eq!(parse_states("0").unwrap(), vec![0]);
        assert_eq!(parse_states("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_states("0..=2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_states("4,0").unwrap(), vec![4, 0]);
        assert!(parse_states("3..1").is_err());
    }
}
