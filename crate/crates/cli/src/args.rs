use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cevmix::{BoundaryBehaviour, CevModel, QuadratureConfig};

#[derive(Debug, Parser)]
#[command(name = "cevmix", version, about = "Option prices, smiles and asymptotics under a CEV-randomized variance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Call prices and implied vols on a strike grid
    Price(GridCmd),
    /// Implied-vol smile on a strike grid for each maturity
    Smile(GridCmd),
    /// Digital call prices alongside call prices
    Digital(GridCmd),
    /// Numeric implied variance against its small-maturity asymptote
    Asymptote(AsymptoteCmd),
    /// Critical moments and implied-variance wing slopes
    Wings(WingsCmd),
    /// Numeric prices against the large-maturity expansion
    LargeTime(GridCmd),
    /// Monte-Carlo prices against quadrature
    McCheck(McCmd),
    /// Hedge ratio between two maturities
    Hedge(HedgeCmd),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Price(_) => "price",
            Command::Smile(_) => "smile",
            Command::Digital(_) => "digital",
            Command::Asymptote(_) => "asymptote",
            Command::Wings(_) => "wings",
            Command::LargeTime(_) => "large-time",
            Command::McCheck(_) => "mc-check",
            Command::Hedge(_) => "hedge",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Price(c) | Command::Smile(c) | Command::Digital(c) | Command::LargeTime(c) => &c.common,
            Command::Asymptote(c) => &c.grid.common,
            Command::Wings(c) => &c.common,
            Command::McCheck(c) => &c.grid.common,
            Command::Hedge(c) => &c.grid.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Boundary {
    Absorbing,
    Reflecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Exact,
    Euler,
}

#[derive(Debug, Args)]
pub struct Common {
    /// CEV exponent p
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    /// Initial variance y0
    #[arg(long, default_value_t = 0.07)]
    pub y0: f64,
    /// Vol-of-variance xi
    #[arg(long, conflicts_with = "xi_auto")]
    pub xi: Option<f64>,
    /// Sets xi = c * y0^(1/2 - p); used with c = 0.2 when neither --xi nor --xi-auto is given
    #[arg(long, value_name = "C")]
    pub xi_auto: Option<f64>,
    /// Horizon t of the variance process
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Boundary::Absorbing)]
    pub boundary: Boundary,

    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub max_subdivisions: Option<usize>,
    #[arg(long)]
    pub tail_mass_tol: Option<f64>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; defaults to `$CEVMIX_OUTPUT_DIR/<command>.<ext>` when that variable is set, else stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// key=value file whose entries fill in flags not given on the command line
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn model(&self) -> Result<CevModel, cevmix::ModelError> {
        let b = match self.boundary {
            Boundary::Absorbing => BoundaryBehaviour::Absorbing,
            Boundary::Reflecting => BoundaryBehaviour::Reflecting,
        };
        match self.xi {
            Some(xi) => CevModel::new(self.y0, xi, self.t, self.p, b),
            None => CevModel::with_xi_auto(self.y0, self.xi_auto.unwrap_or(0.2), self.t, self.p, b),
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        let mut q = QuadratureConfig::default();
        if let Some(v) = self.rel_tol {
            q.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            q.abs_tol = v;
        }
        if let Some(v) = self.max_subdivisions {
            q.max_subdivisions = v;
        }
        if let Some(v) = self.tail_mass_tol {
            q.tail_mass_tol = v;
        }
        q
    }
}

#[derive(Debug, Args)]
pub struct GridCmd {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated log-moneyness values (strikes with --strike)
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required_unless_present = "k_grid")]
    pub k: Vec<f64>,
    /// Evenly spaced grid `start:end:n`
    #[arg(long, allow_hyphen_values = true, conflicts_with = "k")]
    pub k_grid: Option<String>,
    /// Read --k / --k-grid as raw strikes K = e^k
    #[arg(long)]
    pub strike: bool,
    /// Comma-separated maturities
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
}

impl GridCmd {
    /// Log-moneyness grid in input order.
    pub fn ks(&self) -> Result<Vec<f64>, String> {
        let raw = match &self.k_grid {
            Some(spec) => parse_range(spec)?,
            None => self.k.clone(),
        };
        if raw.is_empty() {
            return Err("empty strike grid".into());
        }
        if self.strike {
            raw.iter()
                .map(|&x| if x > 0.0 { Ok(x.ln()) } else { Err(format!("strike must be positive, got {x}")) })
                .collect()
        } else {
            Ok(raw)
        }
    }

    pub fn taus(&self) -> Result<Vec<f64>, String> {
        if self.tau.is_empty() {
            return Err("empty maturity list".into());
        }
        Ok(self.tau.clone())
    }
}

fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || format!("expected start:end:n, got `{spec}`");
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err("grid needs at least one point".into()),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

#[derive(Debug, Args)]
pub struct AsymptoteCmd {
    #[command(flatten)]
    pub grid: GridCmd,
    /// Read t as the forward-start date; only the output label changes
    #[arg(long)]
    pub forward: bool,
}

#[derive(Debug, Args)]
pub struct WingsCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct McCmd {
    #[command(flatten)]
    pub grid: GridCmd,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerKind::Euler)]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = cevmix::mc_oracle::DEFAULT_EULER_STEPS)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct HedgeCmd {
    #[command(flatten)]
    pub grid: GridCmd,
    /// Maturity of the hedging call
    #[arg(long = "big-t")]
    pub big_t: f64,
    /// Spot, with the forward normalized to one at k = 0
    #[arg(long, default_value_t = 1.0)]
    pub spot: f64,
}

/// Appends `--key value` for every config entry whose flag is absent from `args`, so
/// command-line flags take precedence.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>, String> {
    let path = match args.iter().position(|a| a == "--config") {
        Some(i) => args.get(i + 1).cloned().ok_or("--config needs a path")?,
        None => match args.iter().find_map(|a| a.strip_prefix("--config=")) {
            Some(p) => p.to_string(),
            None => return Ok(args),
        },
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config `{path}`: {e}"))?;
    let mut out = args.clone();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(format!("{path}:{}: expected key=value", lineno + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let flag = format!("--{key}");
        let present = |f: &str| args.iter().any(|a| a == f || a.starts_with(&format!("{f}=")));
        let rival = match key.as_str() {
            "xi" => Some("--xi-auto"),
            "xi-auto" => Some("--xi"),
            "k" => Some("--k-grid"),
            "k-grid" => Some("--k"),
            _ => None,
        };
        let given = present(&flag) || rival.is_some_and(present);
        if given || key == "config" {
            continue;
        }
        match value {
            "true" => out.push(flag),
            "false" => {}
            v => out.push(format!("{flag}={v}")),
        }
    }
    Ok(out)
}
