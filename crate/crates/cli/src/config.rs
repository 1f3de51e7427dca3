//! Command-line definitions and the `key=value` configuration file.
//!
//! A file given with `--config` is turned into flags placed right after the
//! subcommand, so flags on the command line come later and win.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "liyau", version, about = "Li-Yau constants, inequality checks and Harnack bounds for non-local diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Tabulate the radial stable density Φ_β.
    #[command(args_override_self = true)]
    Density(DensityArgs),
    /// Fractional Laplacian of a sample field, by quadrature and spectrally.
    #[command(args_override_self = true)]
    Fraclap(FraclapArgs),
    /// The Li-Yau constant C_LY(β, d), optionally over a range of β.
    #[command(args_override_self = true)]
    LiyauConst(LiyauConstArgs),
    /// Seeded randomized checks of the discrete and continuous inequalities.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Closed forms and the sharp Li-Yau bound on a finite Markov chain.
    #[command(args_override_self = true)]
    MarkovVerify(MarkovArgs),
    /// Harnack bounds and their checks.
    #[command(args_override_self = true)]
    Harnack(HarnackArgs),
    /// C_LY(β, d) as β approaches 2, with error bars.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Density(_) => "density",
            Command::Fraclap(_) => "fraclap",
            Command::LiyauConst(_) => "liyau-const",
            Command::Verify(_) => "verify",
            Command::MarkovVerify(_) => "markov-verify",
            Command::Harnack(_) => "harnack",
            Command::Sweep(_) => "sweep",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Density(a) => &a.common,
            Command::Fraclap(a) => &a.common,
            Command::LiyauConst(a) => &a.common,
            Command::Verify(a) => &a.common,
            Command::MarkovVerify(a) => &a.common,
            Command::Harnack(a) => &a.common,
            Command::Sweep(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Output directory; defaults to $LIYAU_OUT_DIR, then ./liyau-out.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// File of `key=value` lines supplying defaults for this subcommand's flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Quadrature overrides as comma-separated `key=value`, e.g. `rel_tol=1e-9,angular_nodes=48`.
    #[arg(long)]
    pub quad: Option<String>,
}

fn beta_arg(s: &str) -> Result<f64, String> {
    let b: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(b > 0.0 && b < 2.0) {
        return Err(format!("β must lie in (0, 2), got {b}"));
    }
    Ok(b)
}

fn dim_arg(s: &str) -> Result<usize, String> {
    let d: usize = s.parse().map_err(|e| format!("{e}"))?;
    if !(1..=3).contains(&d) {
        return Err(format!("dimension must be 1, 2 or 3, got {d}"));
    }
    Ok(d)
}

fn positive_arg(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("expected a positive number, got {v}"));
    }
    Ok(v)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[arg(long, value_parser = beta_arg)]
    pub beta: f64,
    #[arg(long, value_parser = dim_arg, default_value_t = 1)]
    pub dim: usize,
    /// Largest tabulated radius of the CSV.
    #[arg(long, value_parser = positive_arg, default_value_t = 10.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Node spacing of the profile table in asinh coordinates.
    #[arg(long, value_parser = positive_arg, default_value_t = 0.005)]
    pub u_step: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// `exp(-x²)`
    Gaussian,
    /// `1/(1 + x²)`
    Cauchy,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FraclapArgs {
    #[arg(long, value_parser = beta_arg)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = FieldKind::Gaussian)]
    pub field: FieldKind,
    /// Grid points.
    #[arg(long, default_value_t = 512)]
    pub points: usize,
    /// The grid spans `[-half_width, half_width]`.
    #[arg(long, value_parser = positive_arg, default_value_t = 10.0)]
    pub half_width: f64,
    /// Nodes in the central half of the grid at which both methods are compared.
    #[arg(long, default_value_t = 21)]
    pub eval: usize,
    /// Accepted disagreement between quadrature and spectral values.
    #[arg(long, value_parser = positive_arg, default_value_t = 1e-3)]
    pub agree_tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    /// Largest |y| scanned for the supremum of J.
    #[arg(long, value_parser = positive_arg, default_value_t = 50.0)]
    pub y_max: f64,
    /// Log-spaced scan nodes.
    #[arg(long, default_value_t = 49)]
    pub nodes: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LiyauConstArgs {
    #[arg(long, value_parser = beta_arg, required_unless_present = "sweep")]
    pub beta: Option<f64>,
    #[arg(long, value_parser = dim_arg, default_value_t = 1)]
    pub dim: usize,
    /// `start:stop:steps`, evenly spaced β values replacing `--beta`.
    #[arg(long)]
    pub sweep: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// The key inequality on random finite kernels.
    Key,
    /// The reduction from the heat kernel to all solutions on random chains.
    Reduction,
    /// The fractional Li-Yau inequality for random kernel solutions, d = 1.
    Liyau,
    /// The differential Harnack form and its agreement with the Li-Yau margin, d = 1.
    Dh,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub check: CheckKind,
    /// Instances: key 1000, reduction 500, liyau 50 solutions, dh 20 points.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Stability index for the continuous checks.
    #[arg(long, value_parser = beta_arg, default_value_t = 1.0)]
    pub beta: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum GraphKind {
    /// The complete graph on `--n` vertices with unit rates.
    #[value(name = "Kn", alias = "kn")]
    Kn,
    /// A chain read from `--edges`.
    #[value(name = "edges")]
    Edges,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MarkovArgs {
    #[arg(long, value_enum, default_value_t = GraphKind::Kn)]
    pub graph: GraphKind,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Edge-list file for `--graph edges`.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Times per decade on the log grid.
    #[arg(long, default_value_t = 20)]
    pub per_decade: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// The complete graph.
    Kn,
    /// The fractional heat equation, d = 1.
    Frac,
    /// The classical heat equation.
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// A unit point mass at the origin (state 0 on graphs).
    Spike,
    /// Seeded random positive data.
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HarnackArgs {
    #[arg(long, value_enum)]
    pub setting: Setting,
    #[arg(long, value_parser = positive_arg, default_value_t = 1.0)]
    pub t1: f64,
    #[arg(long, value_parser = positive_arg, default_value_t = 2.0)]
    pub t2: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub x1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x2: f64,
    /// Vertices of the complete graph.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, value_parser = beta_arg, default_value_t = 1.0)]
    pub beta: f64,
    /// Dimension of the Gaussian reference; the points lie on the first axis.
    #[arg(long, value_parser = dim_arg, default_value_t = 1)]
    pub dim: usize,
    /// Weight exponent of the fractional bound; defaults to d/β.
    #[arg(long, value_parser = positive_arg)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = DataKind::Spike)]
    pub data: DataKind,
    /// Run this many random configurations instead of the single check.
    #[arg(long, default_value_t = 0)]
    pub instances: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_parser = dim_arg, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, value_parser = beta_arg, default_value_t = 1.0)]
    pub start: f64,
    #[arg(long, value_parser = beta_arg, default_value_t = 1.99)]
    pub stop: f64,
    #[arg(long, default_value_t = 12)]
    pub steps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Splices the flags of a `--config` file in after the subcommand.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(sub) = args.get(1).and_then(|s| s.to_str()) else {
        return Ok(args);
    };
    let mut path = None;
    for (i, a) in args.iter().enumerate().skip(2) {
        let a = a.to_string_lossy();
        if a == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let cmd = Cli::command();
    let Some(subcmd) = cmd.find_subcommand(sub) else {
        return Ok(args);
    };
    let known: Vec<String> = subcmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError::Usage(format!("{}:{}: {msg}", path.display(), i + 1));
        let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            return Err(bad("config files cannot include other config files"));
        }
        if !known.contains(&key) || key == "help" || key == "version" {
            return Err(bad(&format!("unknown key '{}' for {sub}", k.trim())));
        }
        flags.push(OsString::from(format!("--{key}")));
        flags.push(OsString::from(v.trim()));
    }
    let mut out = args[..2].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(v: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(v.iter().map(OsString::from))
    }

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn beta_range_is_enforced() {
        assert!(parse(&["liyau", "liyau-const", "--beta", "3"]).is_err());
        assert!(parse(&["liyau", "liyau-const", "--beta", "0"]).is_err());
        assert!(parse(&["liyau", "liyau-const", "--beta", "1", "--dim", "4"]).is_err());
        assert!(parse(&["liyau", "liyau-const", "--beta", "1", "--dim", "1"]).is_ok());
        assert!(parse(&["liyau", "liyau-const", "--sweep", "1:1.5:3"]).is_ok());
        assert!(parse(&["liyau", "liyau-const"]).is_err());
    }

    #[test]
    fn later_flags_win() {
        let Command::Verify(v) = parse(&["liyau", "verify", "--check", "key", "--seed", "3", "--seed", "42"]).unwrap().command else {
            panic!()
        };
        assert_eq!(v.common.seed, 42);
        assert_eq!(v.check, CheckKind::Key);
    }

    #[test]
    fn graph_names() {
        for g in ["Kn", "kn"] {
            let Command::MarkovVerify(m) = parse(&["liyau", "markov-verify", "--graph", g, "--n", "5"]).unwrap().command else { panic!() };
            assert_eq!((m.graph, m.n), (GraphKind::Kn, 5));
        }
    }

    #[test]
    fn negative_positions() {
        let Command::Harnack(h) = parse(&["liyau", "harnack", "--setting", "gauss", "--x1", "-1.5"]).unwrap().command else { panic!() };
        assert_eq!(h.x1, -1.5);
    }
}
