//! Acceptance battery: one PASS/FAIL line per criterion at the stated
//! tolerances and runtime limits.
//!
//! Criteria listed in `verify::KNOWN_SHORTFALLS` are printed like the rest
//! but do not fail the run; any other failure exits nonzero.

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use divisor_cli::verify::{self, known_shortfall, Profile, CRITERIA};
use divisor_core::main_terms::LaurentCoeffs;

/// Runtime limits in seconds; criteria without a stated limit get a generous one.
fn limit(id: u8) -> Duration {
    Duration::from_secs(match id {
        1 => 30,
        4 => 600,
        5 => 300,
        6 => 1200,
        7 => 600,
        8 => 5,
        10 => 120,
        _ => 600,
    })
}

/// Every subcommand with small arguments.
const COMMANDS: &[&[&str]] = &[
    &["sieve", "--kind", "dk:3", "--lo", "1", "--hi", "5000"],
    &["sieve", "--kind", "omega", "--lo", "999000", "--hi", "1001000", "--format", "json"],
    &["delta", "--k", "3", "--x", "123456.5"],
    &["delta-meansq", "--k", "2", "--X", "2e5"],
    &["delta-meansq", "--k", "2", "--X", "2e5", "--mode", "sampled", "--samples", "50000"],
    &["voronoi", "--N", "2000", "--grid", "50", "--xmin", "1e5", "--xmax", "2e5"],
    &["shifted", "--k", "3", "--f", "2", "--N", "1e5", "--mode", "dyadic"],
    &["shifted-fit", "--k", "2", "--f", "1", "--checkpoints", "10000,20000,40000,80000,160000"],
    &["avg-delta3", "--N", "1e5", "--H", "300"],
    &["shortint", "--T", "1e5", "--U", "20", "--stat", "discrete", "--fit-us", "4,8,16,32,64"],
    &["shortint", "--T", "1e5", "--H", "5e4", "--U", "30", "--stat", "integral"],
    &["shortint", "--T", "1e5", "--H", "1e5", "--U", "30", "--stat", "jutila"],
    &["shortint", "--T", "1e5", "--H", "1e4", "--U", "50", "--stat", "maxwin"],
    &["shortint", "--T", "1e5", "--H", "1e4", "--U", "100", "--stat", "large"],
    &["iterate", "--k", "3", "--n", "907200"],
    &["records", "--k", "2", "--xmax", "2e6"],
    &["sumiter", "--k", "2", "--x", "1e6"],
    &["ivic", "--x", "1e6", "--variant", "bigomega"],
    &["erdos-short", "--window", "1e7", "--samples", "200", "--regime", "sub", "--seed", "7"],
    &["dkplus", "--k", "3", "--x", "1e6"],
    &["ramanujan", "--k", "50"],
    &["erdos-katai", "--r", "3", "--depth", "4"],
    &["verify", "quick"],
];

fn run_divlab(args: &[&str], threads: usize, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_divlab"))
        .args(args)
        .args(["--threads", &threads.to_string(), "--no-timestamps", "--out"])
        .arg(out)
        .env_remove("DIVLAB_THREADS")
        .env_remove("DIVLAB_NO_TIMESTAMPS")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .expect("divlab runs")
        .code()
        .unwrap_or(-1)
}

/// Number of commands whose output differs between thread counts.
fn determinism() -> (usize, String) {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut differing = Vec::new();
    for (i, args) in COMMANDS.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in [1usize, 4, 8] {
            let path = dir.path().join(format!("{i}-{threads}.out"));
            let code = run_divlab(args, threads, &path);
            outputs.push((code, std::fs::read(&path).unwrap_or_default()));
        }
        if outputs.iter().any(|o| *o != outputs[0]) || outputs[0].1.is_empty() {
            differing.push(args.join(" "));
        }
    }
    let detail = if differing.is_empty() {
        format!("{} commands bit-identical at 1, 4 and 8 threads", COMMANDS.len())
    } else {
        format!("differing: {}", differing.join("; "))
    };
    (differing.len(), detail)
}

fn main() {
    let laurent = LaurentCoeffs::embedded();
    let mut unexpected = 0;
    for (id, title) in CRITERIA {
        let start = Instant::now();
        let (pass, detail) = if id == 11 {
            let (n, detail) = determinism();
            (n == 0, detail)
        } else {
            match verify::criterion(id, Profile::Full, &laurent, verify::DEFAULT_SEED) {
                Ok(c) => {
                    let detail = c
                        .checks
                        .iter()
                        .map(|ch| format!("{} = {} (band {})", ch.name, ch.observed, ch.expected))
                        .collect::<Vec<_>>()
                        .join("; ");
                    (c.passed(), detail)
                }
                Err(e) => (false, format!("error: {e}")),
            }
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit(id);
        let ok = pass && in_time;
        let mut line = format!(
            "{} criterion {id:>2} ({title}): {detail}; {:.1}s of {}s",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit(id).as_secs()
        );
        if !ok {
            match known_shortfall(id) {
                Some(why) if in_time => line.push_str(&format!(" [known shortfall: {why}]")),
                _ => unexpected += 1,
            }
        }
        println!("{line}");
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
