//! Flag definitions, the `lo:hi:count` grid syntax, and config-file merging.
//!
//! Every subcommand takes `--config <path>` with line-based `key=value`
//! overrides; explicit flags win. Resolution happens through [`Resolver`] so
//! that each consumed value is simultaneously recorded for the output header
//! (every run echoes its fully-resolved configuration).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rbm_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rbm",
    version,
    about = "Local-time rate functions, transforms, and Monte Carlo for Brownian motion reflected on [0, b]"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Tabulate the cumulant limit V(alpha) or the decay rate V*(x) on a grid (CSV to stdout)
    Rate(RateArgs),
    /// Evaluate the resolvent transform f_hat on an x-grid, or its equation residuals (CSV to stdout)
    Mgf(MgfArgs),
    /// Run reflected paths: dump trajectories to CSV files or summarize one functional as JSON
    Simulate(SimulateArgs),
    /// Run a verification suite; writes <suite>_<seed>.json/.csv reports into --out
    Verify(VerifyArgs),
    /// Write the canonical rate-curve datasets (rate_alpha.csv, rate_x.csv) into --out
    Export(ExportArgs),
}

#[derive(Args)]
pub struct RateArgs {
    /// Strip width b, in space units (> 0)
    #[arg(long)]
    pub b: Option<f64>,
    /// Tilt grid lo:hi:count for V(alpha); alpha is per unit of local time
    #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
    pub alpha_grid: Option<Grid>,
    /// Level grid lo:hi:count for V*(x); x is local time per unit time
    #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
    pub x_grid: Option<Grid>,
    /// key=value overrides file; explicit flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct MgfArgs {
    /// Strip width b, in space units (> 0)
    #[arg(long)]
    pub b: Option<f64>,
    /// Laplace rate lambda, per unit time (must exceed -pi^2/(8 b^2))
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Local-time tilt alpha (must stay below the pole alpha*(lambda))
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Evaluation grid lo:hi:count over start points in [0, b]; defaults to 0:b:11
    #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
    pub x_grid: Option<Grid>,
    /// Instead of values, report defining-equation residuals at these grid sizes, e.g. 64,128,256
    #[arg(long, value_name = "N1,N2,...")]
    pub residuals: Option<String>,
    /// key=value overrides file; explicit flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Strip width b, in space units (> 0)
    #[arg(long)]
    pub b: Option<f64>,
    /// Start point in [0, b], space units
    #[arg(long)]
    pub x: Option<f64>,
    /// Time horizon, time units
    #[arg(long)]
    pub t: Option<f64>,
    /// Simulation step, time units
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of independent paths
    #[arg(long)]
    pub paths: Option<u64>,
    /// RNG seed (64-bit); same seed means identical output bytes
    #[arg(long)]
    pub seed: Option<u64>,
    /// Functional to summarize: L_over_t, U_over_t, exp_tilt_L, occupation_mean
    #[arg(long)]
    pub functional: Option<String>,
    /// Tilt alpha for exp_tilt_L, per unit of local time
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Write this many full t,X,L,U trajectories as CSV files instead of a summary
    #[arg(long, value_name = "K")]
    pub dump_paths: Option<u64>,
    /// Output directory for dumped paths
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// key=value overrides file; explicit flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Which suite to run: laplace, logmgf, ldp, ergodic, or all
    #[arg(long)]
    pub suite: String,
    /// Strip width b, in space units (> 0)
    #[arg(long)]
    pub b: Option<f64>,
    /// Start point in [0, b], space units (suite-specific default)
    #[arg(long)]
    pub x: Option<f64>,
    /// Horizon / largest probe time, time units (suite-specific default)
    #[arg(long)]
    pub t: Option<f64>,
    /// Simulation step, time units (suite-specific default)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Paths per run (suite-specific default)
    #[arg(long)]
    pub paths: Option<u64>,
    /// RNG seed (64-bit)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single tilt alpha to check instead of the suite's default set
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Single Laplace rate lambda instead of the suite's default set (laplace suite)
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Single tail threshold instead of the default {0.8, 0.2} (ldp suite); local time per unit time
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Directory the report files are written into
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// key=value overrides file; explicit flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExportArgs {
    /// Strip width b, in space units (> 0)
    #[arg(long)]
    pub b: Option<f64>,
    /// Tilt grid lo:hi:count; defaults to -5:5:201
    #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
    pub alpha_grid: Option<Grid>,
    /// Level grid lo:hi:count; defaults to 0:1/b:101
    #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
    pub x_grid: Option<Grid>,
    /// Directory the dataset files are written into
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// key=value overrides file; explicit flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Inclusive evaluation grid `lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Grid {
    /// Materializes the points; both endpoints are hit exactly.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:count, got `{s}`"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| format!("bad grid lower end `{}`", parts[0]))?;
        let hi: f64 = parts[1].parse().map_err(|_| format!("bad grid upper end `{}`", parts[1]))?;
        let count: usize = parts[2].parse().map_err(|_| format!("bad grid count `{}`", parts[2]))?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(format!("grid ends must be finite in `{s}`"));
        }
        if count == 0 {
            return Err("grid count must be at least 1".into());
        }
        if count == 1 && lo != hi {
            return Err(format!("single-point grid needs lo == hi in `{s}`"));
        }
        if hi < lo {
            return Err(format!("grid upper end below lower end in `{s}`"));
        }
        Ok(Grid { lo, hi, count })
    }
}

/// Merges config-file overrides under explicit flags and records every
/// resolved value for the output header.
pub struct Resolver {
    overrides: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    pub fn load(config: Option<&PathBuf>) -> Result<Self> {
        let mut overrides = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (ln, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(Error::Config(format!(
                        "{}:{}: expected key=value, got `{line}`",
                        path.display(),
                        ln + 1
                    )));
                };
                overrides.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Resolver {
            overrides,
            echo: BTreeMap::new(),
        })
    }

    fn pull<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if cli.is_some() {
            self.overrides.remove(key);
            return Ok(cli);
        }
        match self.overrides.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key `{key}`: {e}"))),
        }
    }

    pub fn f64(&mut self, key: &str, cli: Option<f64>, default: f64) -> Result<f64> {
        let v = self.pull(key, cli)?.unwrap_or(default);
        self.echo.insert(key.into(), format!("{v}"));
        Ok(v)
    }

    pub fn opt_f64(&mut self, key: &str, cli: Option<f64>) -> Result<Option<f64>> {
        let v = self.pull(key, cli)?;
        if let Some(v) = v {
            self.echo.insert(key.into(), format!("{v}"));
        }
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, cli: Option<u64>, default: u64) -> Result<u64> {
        let v = self.pull(key, cli)?.unwrap_or(default);
        self.echo.insert(key.into(), format!("{v}"));
        Ok(v)
    }

    pub fn opt_u64(&mut self, key: &str, cli: Option<u64>) -> Result<Option<u64>> {
        let v = self.pull(key, cli)?;
        if let Some(v) = v {
            self.echo.insert(key.into(), format!("{v}"));
        }
        Ok(v)
    }

    pub fn grid(&mut self, key: &str, cli: Option<Grid>, default: Grid) -> Result<Grid> {
        let v = self.pull(key, cli)?.unwrap_or(default);
        self.echo.insert(key.into(), format!("{v}"));
        Ok(v)
    }

    pub fn opt_grid(&mut self, key: &str, cli: Option<Grid>) -> Result<Option<Grid>> {
        let v = self.pull(key, cli)?;
        if let Some(v) = v {
            self.echo.insert(key.into(), format!("{v}"));
        }
        Ok(v)
    }

    pub fn string(&mut self, key: &str, cli: Option<String>, default: &str) -> Result<String> {
        let v = self.pull(key, cli)?.unwrap_or_else(|| default.to_string());
        self.echo.insert(key.into(), v.clone());
        Ok(v)
    }

    pub fn opt_string(&mut self, key: &str, cli: Option<String>) -> Result<Option<String>> {
        let v = self.pull(key, cli)?;
        if let Some(v) = &v {
            self.echo.insert(key.into(), v.clone());
        }
        Ok(v)
    }

    pub fn path(&mut self, key: &str, cli: Option<PathBuf>, default: &str) -> Result<PathBuf> {
        let v = match self.pull::<String>(key, cli.map(|p| p.display().to_string()))? {
            Some(s) => PathBuf::from(s),
            None => PathBuf::from(default),
        };
        self.echo.insert(key.into(), v.display().to_string());
        Ok(v)
    }

    /// Rejects leftover config keys so a typo cannot silently do nothing.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(key) = self.overrides.keys().next() {
            return Err(Error::Config(format!(
                "unknown config key `{key}` for this command"
            )));
        }
        Ok(self.echo)
    }
}

/// The `# key=value` preamble every text output starts with.
pub fn comment_header(command: &str, echo: &BTreeMap<String, String>) -> String {
    let mut s = format!(
        "# rbm {}\n# command: {command}\n",
        rbm_core::experiments::VERSION
    );
    for (k, v) in echo {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}
