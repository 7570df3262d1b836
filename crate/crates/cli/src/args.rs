//! Command-line grammar.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

use crate::report::Format;

/// Accepts plain integers, `_` separators and exact scientific notation
/// such as `1e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let t = s.replace('_', "");
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 9_007_199_254_740_992.0 => Ok(v as u64),
        _ => Err(format!("'{s}' is not a non-negative integer")),
    }
}

pub fn parse_real(s: &str) -> Result<f64, String> {
    match s.replace('_', "").parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a finite number")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "divlab", version, about = "Numerical experiments on divisor functions and their error terms")]
pub struct Cli {
    /// Worker thread cap (defaults to all cores).
    #[arg(long, global = true, env = "DIVLAB_THREADS")]
    pub threads: Option<usize>,

    /// Write the report to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output format; bulk tabular commands default to csv, the rest to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Seed for commands that sample at random.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write null timestamps so repeated runs produce identical reports.
    #[arg(long, global = true, env = "DIVLAB_NO_TIMESTAMPS")]
    pub no_timestamps: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Values of d, d_k, ω or Ω on [lo, hi).
    Sieve(SieveArgs),
    /// Δ_k(x) with the exact summatory value and main term.
    Delta(DeltaArgs),
    /// ∫_1^X Δ_k(x)² dx.
    DeltaMeansq(DeltaMeansqArgs),
    /// Truncated Voronoï series against the exact Δ(x).
    Voronoi(VoronoiArgs),
    /// Shifted convolution sum Σ d_k(n) d_k(n+f).
    Shifted(ShiftedArgs),
    /// Log-polynomial main-term fit of shifted sums over checkpoints.
    ShiftedFit(ShiftedFitArgs),
    /// Σ_{h≤H} Δ_3(N;h) against the H² + N^{4/3} bound.
    AvgDelta3(AvgDelta3Args),
    /// Mean squares, extremes and large values of Δ(x+U) − Δ(x).
    Shortint(ShortintArgs),
    /// The k-fold iterate d(d(…d(n)…)).
    Iterate(IterateArgs),
    /// Running maxima of the iterated divisor function.
    Records(RecordsArgs),
    /// Σ_{n≤x} d^(k)(n) with its normalization.
    Sumiter(SumiterArgs),
    /// Σ_{n≤x} d(n + f(n)).
    Ivic(IvicArgs),
    /// Divisor sums over random short intervals.
    ErdosShort(ErdosShortArgs),
    /// Σ_{n≤x} max_{h<k} d(n+h).
    Dkplus(DkplusArgs),
    /// Numbers with d^(2)(N) = 2^k, built from prime-power factors.
    Ramanujan(RamanujanArgs),
    /// The Erdős–Kátai chain of constructed numbers.
    ErdosKatai(ErdosKataiArgs),
    /// Run the acceptance battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SieveArgs {
    /// d, dk:K, omega or bigomega.
    #[arg(long, default_value = "d")]
    pub kind: String,
    #[arg(long, value_parser = parse_count)]
    pub lo: u64,
    #[arg(long, value_parser = parse_count)]
    pub hi: u64,
    #[arg(long, value_parser = parse_count)]
    pub block: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DeltaArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, value_parser = parse_real)]
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeansqMode {
    Exact,
    Sampled,
}

#[derive(Debug, Args, Serialize)]
pub struct DeltaMeansqArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long = "X", value_parser = parse_real)]
    #[serde(rename = "X")]
    pub x_max: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: MeansqMode,
    /// Midpoint nodes in sampled mode.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub samples: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct VoronoiArgs {
    /// Single evaluation point.
    #[arg(long, value_parser = parse_real, conflicts_with = "grid")]
    pub x: Option<f64>,
    #[arg(long = "N", value_parser = parse_count)]
    #[serde(rename = "N")]
    pub n_terms: u64,
    /// Number of half-integer grid points in [xmin, xmax).
    #[arg(long, requires_all = ["xmin", "xmax"])]
    pub grid: Option<usize>,
    #[arg(long, value_parser = parse_real)]
    pub xmin: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub xmax: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ShiftedArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, value_parser = parse_count, default_value = "1")]
    pub f: u64,
    #[arg(long = "N", value_parser = parse_count)]
    #[serde(rename = "N")]
    pub n: u64,
    /// upto (1 ≤ n ≤ N) or dyadic (N < n ≤ 2N).
    #[arg(long, default_value = "upto")]
    pub mode: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ShiftedFitArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, value_parser = parse_count, default_value = "1")]
    pub f: u64,
    /// Increasing checkpoints N, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
    pub checkpoints: Vec<u64>,
    #[arg(long, default_value = "upto")]
    pub mode: String,
}

#[derive(Debug, Args, Serialize)]
pub struct AvgDelta3Args {
    #[arg(long = "N", value_parser = parse_count)]
    #[serde(rename = "N")]
    pub n: u64,
    #[arg(long = "H", value_parser = parse_count)]
    #[serde(rename = "H")]
    pub h: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Discrete,
    Integral,
    Jutila,
    Maxwin,
    Large,
}

#[derive(Debug, Args, Serialize)]
pub struct ShortintArgs {
    #[arg(long = "T", value_parser = parse_real)]
    #[serde(rename = "T")]
    pub t: f64,
    /// Window length; defaults to T.
    #[arg(long = "H", value_parser = parse_real)]
    #[serde(rename = "H")]
    pub h: Option<f64>,
    #[arg(long = "U", value_parser = parse_real)]
    #[serde(rename = "U")]
    pub u: f64,
    #[arg(long, value_enum)]
    pub stat: Stat,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub cplus: f64,
    #[arg(long, value_parser = parse_real, default_value = "0.5")]
    pub cminus: f64,
    /// Extra U values for a cubic fit of the discrete mean square.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub fit_us: Vec<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct IterateArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RecordsArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, value_parser = parse_count)]
    pub xmax: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SumiterArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, value_parser = parse_count)]
    pub x: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct IvicArgs {
    #[arg(long, value_parser = parse_count)]
    pub x: u64,
    /// d, omega, bigomega or dk:K.
    #[arg(long, default_value = "d")]
    pub variant: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Super,
    Sub,
    Full,
}

#[derive(Debug, Args, Serialize)]
pub struct ErdosShortArgs {
    #[arg(long, value_parser = parse_count)]
    pub window: u64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "super")]
    pub regime: Regime,
    /// Coefficient of √(log log x) in the exponent (h or c).
    #[arg(long, value_parser = parse_real)]
    pub coeff: Option<f64>,
    #[arg(long, value_parser = parse_real, default_value = "0.25")]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DkplusArgs {
    #[arg(long, value_parser = parse_count)]
    pub k: u64,
    #[arg(long, value_parser = parse_count)]
    pub x: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RamanujanArgs {
    #[arg(long, value_parser = parse_count)]
    pub k: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ErdosKataiArgs {
    #[arg(long, value_parser = parse_count, default_value = "3")]
    pub r: u64,
    #[arg(long, default_value_t = 4)]
    pub depth: u32,
    /// Largest number of prime factors a constructed number may carry.
    #[arg(long, value_parser = parse_count)]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Quick,
    Full,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "quick")]
    pub profile: Profile,
}
