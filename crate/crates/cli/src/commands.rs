use serde_json::{json, Value};

use divisor_core::arith_sieve::{sieve_range, FunctionKind, DEFAULT_BLOCK_SIZE};
use divisor_core::extremal_iter::{
    dk_plus_sum, erdos_katai_sequence, erdos_short_interval_check, iterated_divisor, ivic_conjecture_scan,
    ramanujan_lower_bound_check, ramanujan_number, scan_iterated_max, sum_iterated, Checkpoint, IvicVariant,
    ShortRegime, ITERATED_DIVISOR_D, DEFAULT_FACTOR_BUDGET, DEFAULT_SEED,
};
use divisor_core::main_terms::{delta_k, mean_square_delta, residue_poly, LaurentCoeffs, MeanSquareMode};
use divisor_core::shifted_conv::{averaged_delta3, fit_ingham, fit_shifted, shifted_sum, RangeMode};
use divisor_core::short_intervals::{
    detect_large_values, diff_mean_square_discrete, diff_mean_square_integral, fit_discrete_cubic, jutila_rhs,
    max_window_stat,
};
use divisor_core::voronoi::{divisor_table, half_integer_grid, voronoi_grid};

use crate::args::*;
use crate::report::{float, Band, Check, Table};
use crate::{verify, CliError, Outcome};

type Out = Result<Outcome, CliError>;

fn to_json(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn parse<T: std::str::FromStr<Err = divisor_core::Error>>(s: &str) -> Result<T, CliError> {
    Ok(s.parse::<T>()?)
}

fn integer(name: &str, v: f64) -> Result<u64, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(CliError::Usage(format!("--{name} must be a non-negative integer for this statistic, got {v}")))
    }
}

pub fn dispatch(cmd: &Command, seed: Option<u64>) -> Out {
    match cmd {
        Command::Sieve(a) => sieve(a),
        Command::Delta(a) => delta(a),
        Command::DeltaMeansq(a) => delta_meansq(a),
        Command::Voronoi(a) => voronoi(a),
        Command::Shifted(a) => shifted(a),
        Command::ShiftedFit(a) => shifted_fit(a),
        Command::AvgDelta3(a) => avg_delta3(a),
        Command::Shortint(a) => shortint(a),
        Command::Iterate(a) => iterate(a),
        Command::Records(a) => records(a),
        Command::Sumiter(a) => sumiter(a),
        Command::Ivic(a) => ivic(a),
        Command::ErdosShort(a) => erdos_short(a, seed),
        Command::Dkplus(a) => dkplus(a),
        Command::Ramanujan(a) => ramanujan(a),
        Command::ErdosKatai(a) => erdos_katai(a),
        Command::Verify(a) => verify::suite(a.profile, &LaurentCoeffs::embedded(), seed.unwrap_or(verify::DEFAULT_SEED)),
    }
}

fn sieve(a: &SieveArgs) -> Out {
    let kind: FunctionKind = parse(&a.kind)?;
    let block = a.block.unwrap_or(DEFAULT_BLOCK_SIZE as u64);
    if block == 0 {
        return Err(CliError::Usage("--block must be positive".into()));
    }
    let blocks = sieve_range(a.lo, a.hi, kind, block as usize)?;
    let mut table = Table::new(&["n", "value"]);
    let mut values = Vec::new();
    let mut sum = 0u128;
    for b in &blocks {
        for (n, v) in b.iter() {
            table.push(vec![json!(n), json!(v)]);
            values.push(v);
            sum += v as u128;
        }
    }
    let results = json!({ "kind": kind.to_string(), "lo": a.lo, "hi": a.hi, "count": values.len(), "sum": sum, "values": values });
    Ok(Outcome::new(a, results).table(table, true))
}

fn delta(a: &DeltaArgs) -> Out {
    let poly = residue_poly(a.k, &LaurentCoeffs::embedded())?;
    let e = delta_k(a.x, a.k, &poly)?;
    Ok(Outcome::new(a, to_json(e)))
}

fn delta_meansq(a: &DeltaMeansqArgs) -> Out {
    let poly = residue_poly(a.k, &LaurentCoeffs::embedded())?;
    let mode = match a.mode {
        MeansqMode::Exact => MeanSquareMode::Exact,
        MeansqMode::Sampled => MeanSquareMode::Sampled { samples: a.samples },
    };
    let m = mean_square_delta(a.k, a.x_max, mode, &poly)?;
    Ok(Outcome::new(a, to_json(m)))
}

fn voronoi(a: &VoronoiArgs) -> Out {
    let points = match (a.x, a.grid, a.xmin, a.xmax) {
        (Some(x), None, _, _) => vec![x],
        (None, Some(count), Some(lo), Some(hi)) if count > 0 && hi > lo => half_integer_grid(lo, hi, count),
        (None, Some(_), Some(_), Some(_)) => {
            return Err(CliError::Usage("--grid needs a positive count and xmax > xmin".into()))
        }
        _ => return Err(CliError::Usage("give either --x or --grid with --xmin and --xmax".into())),
    };
    let poly = residue_poly(2, &LaurentCoeffs::embedded())?;
    let d = divisor_table(a.n_terms)?;
    let evals = voronoi_grid(&points, a.n_terms, &d, &poly)?;
    let mut table = Table::new(&["x", "N", "approx", "exact", "abs_err"]);
    for e in &evals {
        table.push(vec![float(e.x), json!(e.n_terms), float(e.approx), float(e.exact), float(e.abs_err)]);
    }
    let max_abs_err = evals.iter().map(|e| e.abs_err).fold(0.0, f64::max);
    let results = json!({ "evaluations": to_json(&evals), "max_abs_err": max_abs_err });
    Ok(Outcome::new(a, results).table(table, true))
}

const SHIFTED_HEADERS: [&str; 7] = ["k", "f", "N", "mode", "sum", "fitted_main", "residual"];

fn shifted(a: &ShiftedArgs) -> Out {
    let mode: RangeMode = parse(&a.mode)?;
    let sum = shifted_sum(a.k, a.n, a.f, mode)?;
    let mut table = Table::new(&SHIFTED_HEADERS);
    table.push(vec![json!(a.k), json!(a.f), json!(a.n), json!(mode.to_string()), json!(sum), Value::Null, Value::Null]);
    let results = json!({ "k": a.k, "f": a.f, "N": a.n, "mode": mode.to_string(), "sum": sum });
    Ok(Outcome::new(a, results).table(table, false))
}

fn shifted_fit(a: &ShiftedFitArgs) -> Out {
    let mode: RangeMode = parse(&a.mode)?;
    let fit = fit_shifted(a.k, a.f, &a.checkpoints, mode)?;
    let mut table = Table::new(&SHIFTED_HEADERS);
    for r in &fit.records {
        table.push(vec![
            json!(r.k),
            json!(r.f),
            json!(r.n),
            json!(r.mode.to_string()),
            json!(r.sum),
            float(r.fitted_main),
            float(r.residual),
        ]);
    }
    let mut results = json!({ "fit": to_json(&fit) });
    if a.k == 2 && mode == RangeMode::UptoN {
        let (ingham, _) = fit_ingham(a.f, &a.checkpoints)?;
        results["ingham"] = to_json(ingham);
    }
    Ok(Outcome::new(a, results).table(table, false))
}

fn avg_delta3(a: &AvgDelta3Args) -> Out {
    let r = averaged_delta3(a.n, a.h)?;
    let (n, h) = (a.n as f64, a.h as f64);
    let bound = 5.0 * (h * h + n.powf(4.0 / 3.0)) * n.powf(0.05);
    let check = Check::new("|Σ_{h≤H} Δ_3(N;h)| ≤ 5(H² + N^{4/3})N^{0.05}", Band::at_most(bound), r.value.abs());
    let mut results = to_json(&r);
    results["h_squared_dominates"] = json!(r.h_squared_dominates());
    Ok(Outcome::new(a, results).check(check))
}

/// 3·(HU𝓛⁵ + T𝓛⁴ log 𝓛 + H^{1/3}T^{2/3}U^{2/3}𝓛^{10/3}(log 𝓛)^{2/3}), 𝓛 = log T.
pub fn max_window_bound(t: f64, h: f64, u: f64) -> f64 {
    let l = t.ln();
    let ll = l.ln();
    3.0 * (h * u * l.powi(5)
        + t * l.powi(4) * ll
        + h.cbrt() * t.powf(2.0 / 3.0) * u.powf(2.0 / 3.0) * l.powf(10.0 / 3.0) * ll.powf(2.0 / 3.0))
}

fn shortint(a: &ShortintArgs) -> Out {
    let h = a.h.unwrap_or(a.t);
    let leading_band = Band::closed(0.5, 2.0);
    let leading_name = "mean square / ((8/π²)·H·U·log³(√T/U))";
    let out = match a.stat {
        Stat::Discrete => {
            let (t, u) = (integer("T", a.t)?, integer("U", a.u)?);
            let s = diff_mean_square_discrete(t, u)?;
            let mut results = to_json(&s);
            results["leading_ratio"] = json!(s.leading_ratio());
            let mut o = Outcome::new(a, Value::Null).check(Check::new(leading_name, leading_band, s.leading_ratio()));
            if !a.fit_us.is_empty() {
                let fit = fit_discrete_cubic(t, &a.fit_us)?;
                o = o.check(Check::new("fitted c₃ / (8/π²)", Band::closed(0.75, 1.25), fit.c3_ratio));
                results["cubic_fit"] = to_json(fit);
            }
            o.results = results;
            o
        }
        Stat::Integral => {
            let s = diff_mean_square_integral(a.t, h, a.u)?;
            let mut results = to_json(&s);
            results["leading_ratio"] = json!(s.leading_ratio());
            Outcome::new(a, results).check(Check::new(leading_name, leading_band, s.leading_ratio()))
        }
        Stat::Jutila => {
            let lhs = diff_mean_square_integral(a.t, h, a.u)?;
            let rhs = jutila_rhs(a.t, h, a.u)?;
            let gap = lhs.mean_square - rhs.value;
            let results = json!({ "lhs": to_json(&lhs), "rhs": to_json(&rhs), "difference": gap });
            let tol = 10.0 * a.t * a.t.ln();
            Outcome::new(a, results).check(Check::new("|LHS − RHS| ≤ 10·T·log T", Band::at_most(tol), gap.abs()))
        }
        Stat::Maxwin => {
            let m = max_window_stat(a.t, h, a.u)?;
            let bound = max_window_bound(a.t, h, a.u);
            let mut results = to_json(&m);
            results["bound"] = json!(bound);
            Outcome::new(a, results).check(Check::new("max-window integral within the bound", Band::at_most(bound), m.value))
        }
        Stat::Large => {
            let r = detect_large_values(a.t, h, a.u, a.cplus, a.cminus)?;
            let (p, n) = (r.positive_intervals as f64, r.negative_intervals as f64);
            Outcome::new(a, to_json(&r))
                .check(Check::new("positive subintervals of length ≥ U", Band::at_least(1.0), p))
                .check(Check::new("negative subintervals of length ≥ U", Band::at_least(1.0), n))
        }
    };
    let mut out = out;
    out.params.insert("H".into(), json!(h));
    Ok(out)
}

fn iterate(a: &IterateArgs) -> Out {
    let value = iterated_divisor(a.n, a.k)?;
    Ok(Outcome::new(a, json!({ "n": a.n, "k": a.k, "value": value })))
}

fn records(a: &RecordsArgs) -> Out {
    let scan = scan_iterated_max(a.xmax, a.k)?;
    let mut table = Table::new(&["n", "value", "normalized"]);
    for r in &scan.records {
        table.push(vec![json!(r.n), json!(r.value), r.normalized.map_or(Value::Null, float)]);
    }
    let mut out = Outcome::new(a, to_json(&scan));
    if let Some(z) = scan.records.last().and_then(|r| r.normalized) {
        out = out.check(Check::new("normalized statistic at the last record in (0, 2D)", Band::open(0.0, 2.0 * ITERATED_DIVISOR_D), z));
    }
    Ok(out.table(table, false))
}

/// Relative change of the normalized sum between the last two decades, when
/// both are at least 10^6.
fn decade_stability(cps: &[Checkpoint], name: &str, tol: f64) -> Option<Check> {
    let is_decade = |x: u64| std::iter::successors(Some(1u64), |p| p.checked_mul(10)).any(|p| p == x);
    let decades: Vec<&Checkpoint> = cps.iter().filter(|c| c.x >= 1_000_000 && is_decade(c.x)).collect();
    let [.., a, b] = decades.as_slice() else { return None };
    let (za, zb) = (a.normalized?, b.normalized?);
    Some(Check::new(format!("{name}: relative change from x = {} to {}", a.x, b.x), Band::below(tol), (za - zb).abs() / zb))
}

fn checkpoint_table(cps: &[Checkpoint]) -> Table {
    let mut table = Table::new(&["x", "sum", "normalized"]);
    for c in cps {
        table.push(vec![json!(c.x), json!(c.sum), c.normalized.map_or(Value::Null, float)]);
    }
    table
}

fn sumiter(a: &SumiterArgs) -> Out {
    let s = sum_iterated(a.x, a.k)?;
    let mut out = Outcome::new(a, to_json(&s)).table(checkpoint_table(&s.checkpoints), false);
    if a.k == 2 {
        if let Some(c) = decade_stability(&s.checkpoints, "normalized iterated sum", 0.15) {
            out = out.check(c);
        }
    }
    Ok(out)
}

fn ivic(a: &IvicArgs) -> Out {
    let variant: IvicVariant = parse(&a.variant)?;
    let s = ivic_conjecture_scan(a.x, variant)?;
    let mut out = Outcome::new(a, to_json(&s)).table(checkpoint_table(&s.checkpoints), false);
    if let Some(c) = decade_stability(&s.checkpoints, "B estimate", 0.10) {
        out = out.check(c);
    }
    Ok(out)
}

fn erdos_short(a: &ErdosShortArgs, seed: Option<u64>) -> Out {
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let regime = match a.regime {
        Regime::Super => ShortRegime::Super { h: a.coeff.unwrap_or(ShortRegime::DEFAULT_H) },
        Regime::Sub => ShortRegime::Sub { c: a.coeff.unwrap_or(ShortRegime::DEFAULT_C) },
        Regime::Full => ShortRegime::Full,
    };
    let r = erdos_short_interval_check(a.window, a.samples, regime, a.delta, seed)?;
    let mut out = Outcome::new(a, to_json(&r));
    out.params.insert("regime".into(), to_json(regime));
    out.seed = Some(seed);
    if matches!(regime, ShortRegime::Super { .. }) {
        out = out.check(Check::new("share of samples with |ratio − 1| ≤ δ", Band::at_least(0.9), r.fraction));
    }
    Ok(out)
}

fn dkplus(a: &DkplusArgs) -> Out {
    let s = dk_plus_sum(a.x, a.k)?;
    Ok(Outcome::new(a, to_json(s)))
}

fn ramanujan(a: &RamanujanArgs) -> Out {
    let r = ramanujan_number(a.k)?;
    let observed = r.d2_power_of_two.map_or(f64::NAN, |e| e as f64);
    let mut results = json!({
        "k": r.k,
        "log_n": r.number.log_n,
        "prime_count": r.number.prime_count(),
        "d2_power_of_two": r.d2_power_of_two,
        "verified": r.verified,
        "factors": r.number.factors,
    });
    if a.k >= 3 {
        results["lower_bound"] = to_json(ramanujan_lower_bound_check(a.k)?);
    }
    Ok(Outcome::new(a, results).check(Check::new("log₂ d^(2)(N) = k", Band::exact(a.k as f64), observed)))
}

fn erdos_katai(a: &ErdosKataiArgs) -> Out {
    let budget = a.budget.map_or(DEFAULT_FACTOR_BUDGET, |b| b as usize);
    let s = erdos_katai_sequence(a.r, a.depth, budget)?;
    let all = s.steps.iter().all(|st| st.verified);
    let results = json!({
        "r": s.r,
        "depth": s.depth,
        "truncated": s.truncated,
        "steps": to_json(&s.steps),
        "prime_counts": s.numbers.iter().map(|n| n.prime_count()).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(a, results).check(Check::flag("d^(j)(N_j) = 2^r at every constructed step", all)))
}
