//! Command-line driver for `divisor-core`: argument parsing, dispatch,
//! report assembly and the verification battery.
//!
//! Exit codes: 0 when every gating check passes, 1 when a check fails or a
//! computation hits a resource or conditioning limit, 2 on usage errors
//! (including arguments the library rejects as out of domain).

pub mod args;
mod commands;
pub mod report;
pub mod verify;

use clap::Parser;
use serde_json::{Map, Value};
use std::ffi::OsString;
use std::io::Write;

use args::{Cli, Command};
use report::{Check, ExperimentReport, Format, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] divisor_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use divisor_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Precondition(_) | E::Domain(_) | E::Range(_) | E::InsufficientOrder { .. }) => 2,
            _ => 1,
        }
    }
}

/// What a command hands back before it is wrapped into a report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub params: Map<String, Value>,
    pub results: Value,
    pub checks: Vec<Check>,
    pub seed: Option<u64>,
    pub table: Option<Table>,
    /// Bulk tabular commands write CSV unless told otherwise.
    pub tabular: bool,
}

impl Outcome {
    pub fn new(params: impl serde::Serialize, results: Value) -> Self {
        let params = match serde_json::to_value(params).expect("params serialize") {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => Map::from_iter([("value".to_string(), other)]),
        };
        Outcome { params, results, checks: Vec::new(), seed: None, table: None, tabular: false }
    }

    pub fn check(mut self, c: Check) -> Self {
        self.checks.push(c);
        self
    }

    pub fn table(mut self, t: Table, tabular: bool) -> Self {
        self.table = Some(t);
        self.tabular = tabular;
        self
    }
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Sieve(_) => "sieve",
        Command::Delta(_) => "delta",
        Command::DeltaMeansq(_) => "delta-meansq",
        Command::Voronoi(_) => "voronoi",
        Command::Shifted(_) => "shifted",
        Command::ShiftedFit(_) => "shifted-fit",
        Command::AvgDelta3(_) => "avg-delta3",
        Command::Shortint(_) => "shortint",
        Command::Iterate(_) => "iterate",
        Command::Records(_) => "records",
        Command::Sumiter(_) => "sumiter",
        Command::Ivic(_) => "ivic",
        Command::ErdosShort(_) => "erdos-short",
        Command::Dkplus(_) => "dkplus",
        Command::Ramanujan(_) => "ramanujan",
        Command::ErdosKatai(_) => "erdos-katai",
        Command::Verify(_) => "verify",
    }
}

fn timestamp(enabled: bool) -> Option<String> {
    enabled.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
}

/// Runs the parsed command under the thread cap and assembles its report.
pub fn execute(cli: &Cli) -> Result<(ExperimentReport, Option<Table>, Format), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let started = timestamp(!cli.no_timestamps);
    let outcome = pool.install(|| commands::dispatch(&cli.command, cli.seed))?;
    let finished = timestamp(!cli.no_timestamps);
    let format = cli.format.unwrap_or(if outcome.tabular { Format::Csv } else { Format::Json });
    let report = ExperimentReport {
        command: command_name(&cli.command).to_string(),
        params: outcome.params,
        started,
        finished,
        results: outcome.results,
        checks: outcome.checks,
        seed: outcome.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((report, outcome.table, format))
}

fn emit(cli: &Cli) -> Result<bool, CliError> {
    let (report, table, format) = execute(cli)?;
    match &cli.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            report.write_to(&mut f, format, table.as_ref())?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write_to(&mut lock, format, table.as_ref())?;
            lock.flush()?;
        }
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        let tag = if c.gating { "FAIL" } else { "FAIL (non-gating)" };
        eprintln!("{tag}: {} observed {} expected {}", c.name, c.observed, c.expected);
    }
    Ok(report.passed())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match emit(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("divlab: {e}");
            e.exit_code()
        }
    }
}
