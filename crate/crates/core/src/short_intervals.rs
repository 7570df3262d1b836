//! Statistics of Δ(x+U) − Δ(x) for the ordinary divisor problem.
//!
//! Every job builds one prefix table of d(n) over the range it touches,
//! anchored by the hyperbola-method value just below it, so each Δ
//! evaluation is a table lookup plus main-term arithmetic. Differences are
//! formed as (S(b) − S(a)) − [main(x+U) − main(x)] with the bracket taken
//! from the cancellation-free increment.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::arith_sieve::{sieve_values, FunctionKind, PrefixTable};
use crate::error::{precondition, Error, Result};
use crate::main_terms::{divisor_summatory, residue_poly, LaurentCoeffs, MainTermPoly};
use crate::numeric::{adaptive_gk15, fit_polynomial, gauss_legendre4, NeumaierSum};

/// Longest prefix table a job may allocate (entries of 8 bytes).
pub const MAX_TABLE_LEN: u64 = 1 << 28;

/// Units of x handled per parallel chunk; fixed so that reductions do not
/// depend on the worker count.
const CHUNK: u64 = 1 << 14;

/// 8/π², the leading coefficient of the short-interval mean square.
pub const C3_LEADING: f64 = 8.0 / (PI * PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatMode {
    Discrete,
    Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortIntervalStat {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub mean_square: f64,
    pub mode: StatMode,
    /// c₀..c₃ of a cubic fit in log(√T/U), when one was made.
    pub fitted_cubic: Option<[f64; 4]>,
}

impl ShortIntervalStat {
    /// mean_square / ((8/π²)·H·U·log³(√T/U)).
    pub fn leading_ratio(&self) -> f64 {
        let l = (self.t.sqrt() / self.u).ln();
        self.mean_square / (C3_LEADING * self.h * self.u * l.powi(3))
    }
}

fn poly2() -> MainTermPoly {
    residue_poly(2, &LaurentCoeffs::embedded()).expect("embedded Laurent data covers k = 2")
}

/// S(n) = Σ_{m≤n} d(m) on a contiguous window.
struct Window {
    table: PrefixTable,
    poly: MainTermPoly,
}

impl Window {
    /// Covers S(n) for lo − 1 ≤ n ≤ last.
    fn new(lo: u64, last: u64) -> Result<Self> {
        let lo = lo.max(1);
        let len = last + 2 - lo;
        if len > MAX_TABLE_LEN {
            return Err(Error::Resource(format!(
                "a prefix table of {len} entries exceeds the limit {MAX_TABLE_LEN}"
            )));
        }
        let table = PrefixTable::build(lo, last + 1, FunctionKind::D, divisor_summatory(lo - 1))?;
        Ok(Self { table, poly: poly2() })
    }

    #[inline]
    fn s(&self, n: u64) -> u64 {
        self.table.get(n)
    }

    /// Δ(x) for x in [n, n+1).
    #[inline]
    fn delta(&self, n: u64, x: f64) -> f64 {
        self.s(n) as f64 - self.poly.main(x)
    }

    /// Δ(x+u) − Δ(x) given ⌊x⌋ = a and ⌊x+u⌋ = b.
    #[inline]
    fn diff(&self, a: u64, b: u64, x: f64, u: f64) -> f64 {
        (self.s(b) - self.s(a)) as f64 - self.poly.increment(x, u)
    }
}

fn sum_chunks<F>(lo: u64, hi: u64, f: F) -> f64
where
    F: Fn(u64, u64) -> NeumaierSum + Sync,
{
    let starts: Vec<u64> = (lo..hi).step_by(CHUNK as usize).collect();
    let parts: Vec<NeumaierSum> = starts.par_iter().map(|&s| f(s, (s + CHUNK).min(hi))).collect();
    let mut total = NeumaierSum::new();
    for p in &parts {
        total.merge(p);
    }
    total.value()
}

fn check_discrete(t: u64, u: u64) -> Result<()> {
    if u == 0 {
        return precondition("U must be at least 1");
    }
    if t < 4 {
        return precondition(format!("T must be at least 4, got {t}"));
    }
    if (2 * u) as f64 > (t as f64).sqrt() {
        return precondition(format!("U = {u} exceeds √T/2 for T = {t}"));
    }
    Ok(())
}

fn discrete_on(w: &Window, t: u64, u: u64) -> f64 {
    let uf = u as f64;
    sum_chunks(t, 2 * t + 1, |a, b| {
        (a..b)
            .map(|n| {
                let d = w.diff(n, n + u, n as f64, uf);
                d * d
            })
            .collect()
    })
}

/// Σ_{T≤n≤2T} (Δ(n+U) − Δ(n))².
pub fn diff_mean_square_discrete(t: u64, u: u64) -> Result<ShortIntervalStat> {
    check_discrete(t, u)?;
    let w = Window::new(t, 2 * t + u)?;
    Ok(ShortIntervalStat {
        t: t as f64,
        h: t as f64,
        u: u as f64,
        mean_square: discrete_on(&w, t, u),
        mode: StatMode::Discrete,
        fitted_cubic: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicFit {
    #[serde(rename = "T")]
    pub t: u64,
    pub stats: Vec<ShortIntervalStat>,
    /// c₀..c₃ in L = log(√T/U).
    pub coeffs: [f64; 4],
    /// c₃ / (8/π²).
    pub c3_ratio: f64,
    pub condition: f64,
}

/// Discrete mean squares for several U from one table, and the least-squares
/// fit of MS/(TU) by a cubic in log(√T/U).
pub fn fit_discrete_cubic(t: u64, us: &[u64]) -> Result<CubicFit> {
    if us.len() < 4 {
        return Err(Error::Conditioning(format!("a cubic needs at least 4 values of U, got {}", us.len())));
    }
    for &u in us {
        check_discrete(t, u)?;
    }
    let u_max = *us.iter().max().unwrap();
    let w = Window::new(t, 2 * t + u_max)?;
    let mut stats: Vec<ShortIntervalStat> = us
        .iter()
        .map(|&u| ShortIntervalStat {
            t: t as f64,
            h: t as f64,
            u: u as f64,
            mean_square: discrete_on(&w, t, u),
            mode: StatMode::Discrete,
            fitted_cubic: None,
        })
        .collect();
    let ls: Vec<f64> = us.iter().map(|&u| ((t as f64).sqrt() / u as f64).ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.mean_square / (s.t * s.u)).collect();
    let fit = fit_polynomial(&ls, &ys, 3)?;
    let coeffs = [fit.coeffs[0], fit.coeffs[1], fit.coeffs[2], fit.coeffs[3]];
    for s in &mut stats {
        s.fitted_cubic = Some(coeffs);
    }
    Ok(CubicFit { t, stats, coeffs, c3_ratio: coeffs[3] / C3_LEADING, condition: fit.condition })
}

fn check_real(t: f64, h: f64, u: f64) -> Result<()> {
    if !(t >= 2.0 && t.is_finite()) {
        return precondition(format!("T must be at least 2, got {t}"));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return precondition(format!("H must be non-negative, got {h}"));
    }
    if !(u > 0.0 && u.is_finite()) {
        return precondition(format!("U must be positive, got {u}"));
    }
    Ok(())
}

/// Pieces of [T, T+H] on which ⌊x⌋ and ⌊x+U⌋ are both constant, delivered
/// unit by unit as (n, j, a, b): on [a, b], ⌊x⌋ = n and ⌊x+U⌋ = n + j.
fn for_each_piece(n: u64, t: f64, end: f64, u: f64, mut visit: impl FnMut(u64, u64, f64, f64)) {
    let whole = u.floor() as u64;
    let frac = u - u.floor();
    let a = t.max(n as f64);
    let b = end.min((n + 1) as f64);
    if a >= b {
        return;
    }
    let split = if frac > 0.0 { (n + 1) as f64 - frac } else { (n + 1) as f64 };
    if a < split {
        visit(n, whole, a, b.min(split));
    }
    if b > split {
        visit(n, whole + 1, a.max(split), b);
    }
}

/// ∫_T^{T+H} (Δ(x+U) − Δ(x))² dx, Gauss–Legendre on each piece between
/// jumps of either summatory term.
pub fn diff_mean_square_integral(t: f64, h: f64, u: f64) -> Result<ShortIntervalStat> {
    check_real(t, h, u)?;
    if 2.0 * u > t.sqrt() {
        return precondition(format!("U = {u} exceeds √T/2 for T = {t}"));
    }
    let mut stat = ShortIntervalStat {
        t,
        h,
        u,
        mean_square: 0.0,
        mode: StatMode::Integral,
        fitted_cubic: None,
    };
    if h == 0.0 {
        return Ok(stat);
    }
    let end = t + h;
    let w = Window::new(t.floor() as u64, (end + u).floor() as u64)?;
    stat.mean_square = sum_chunks(t.floor() as u64, end.ceil() as u64, |lo, hi| {
        let mut acc = NeumaierSum::new();
        for n in lo..hi {
            for_each_piece(n, t, end, u, |n, j, a, b| {
                acc.add(gauss_legendre4(
                    |x| {
                        let d = w.diff(n, n + j, x, u);
                        d * d
                    },
                    a,
                    b,
                ));
            });
        }
        acc
    });
    Ok(stat)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JutilaRhs {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub n_terms: u64,
    pub value: f64,
    /// Sum of the per-term quadrature error estimates.
    pub quad_error: f64,
}

/// d²(n) n^{−3/2} ∫_T^{T+H} x^{1/2}·4 sin²(πU√(n/x)) dx / (4π²), with the
/// quadrature error estimate.
pub fn jutila_term(n: u64, d_n: u64, t: f64, h: f64, u: f64) -> (f64, f64) {
    let nf = n as f64;
    let q = adaptive_gk15(
        |x| {
            let s = (PI * u * (nf / x).sqrt()).sin();
            x.sqrt() * 4.0 * s * s
        },
        t,
        t + h,
        1e-8,
    );
    let scale = (d_n * d_n) as f64 * nf.powf(-1.5) / (4.0 * PI * PI);
    (scale * q.value, scale * q.error_estimate)
}

/// Jutila's diagonal expression for the short-interval mean square, summed
/// over n ≤ T/(2U), smallest term first.
pub fn jutila_rhs(t: f64, h: f64, u: f64) -> Result<JutilaRhs> {
    check_real(t, h, u)?;
    jutila_rhs_truncated(t, h, u, (t / (2.0 * u)).floor() as u64)
}

/// The same diagonal sum cut at an arbitrary n ≤ `n_max`.
pub fn jutila_rhs_truncated(t: f64, h: f64, u: f64, n_max: u64) -> Result<JutilaRhs> {
    check_real(t, h, u)?;
    if u < 1.0 {
        return precondition(format!("U must be at least 1, got {u}"));
    }
    let mut out = JutilaRhs { t, h, u, n_terms: n_max, value: 0.0, quad_error: 0.0 };
    if n_max == 0 || h == 0.0 {
        return Ok(out);
    }
    let d = sieve_values(1, n_max + 1, FunctionKind::D)?;
    let mut terms: Vec<(f64, f64)> = d
        .par_iter()
        .enumerate()
        .map(|(i, &dn)| jutila_term(i as u64 + 1, dn, t, h, u))
        .collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut value = NeumaierSum::new();
    let mut err = NeumaierSum::new();
    for (v, e) in terms {
        value.add(v);
        err.add(e);
    }
    out.value = value.value();
    out.quad_error = err.value();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxWindowStat {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub value: f64,
    /// Asymptotic-regime conditions that the arguments do not meet.
    pub warnings: Vec<String>,
}

/// Sliding extremum over windows of length `w` (w ≥ 1); out[i] covers
/// vals[i..i+w]. `better(a, b)` says a beats b.
fn sliding(vals: &[f64], w: usize, better: impl Fn(f64, f64) -> bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(vals.len() + 1 - w);
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for i in 0..vals.len() {
        while let Some(&back) = dq.back() {
            if better(vals[back], vals[i]) {
                break;
            }
            dq.pop_back();
        }
        dq.push_back(i);
        if dq[0] + w <= i {
            dq.pop_front();
        }
        if i + 1 >= w {
            out.push(vals[dq[0]]);
        }
    }
    out
}

fn max_window_warnings(t: f64, h: f64, u: f64) -> Vec<String> {
    let l = t.ln();
    let mut w = Vec::new();
    if u < l * l {
        w.push(format!("U = {u} is below log²T = {:.3}", l * l));
    }
    if 2.0 * u > t.sqrt() {
        w.push(format!("U = {u} exceeds √T/2"));
    }
    if h < t.sqrt() {
        w.push(format!("H = {h} is below √T"));
    }
    if h > t {
        w.push(format!("H = {h} exceeds T"));
    }
    w
}

/// ∫_T^{T+H} max_{0≤u≤U} |Δ(x+u) − Δ(x)|² dx.
///
/// For fixed x the difference rises by d(m) at each integer m ∈ (x, x+U] and
/// decreases in between, so its extremes are Δ(m) − Δ(x) just after a jump,
/// Δ(m) − d(m) − Δ(x) just before one, and the value at u = U. The jump set
/// is constant on each piece; the resulting integrand is integrated by
/// Gauss–Legendre per piece.
pub fn max_window_stat(t: f64, h: f64, u: f64) -> Result<MaxWindowStat> {
    check_real(t, h, u)?;
    let warnings = max_window_warnings(t, h, u);
    let mut out = MaxWindowStat { t, h, u, value: 0.0, warnings };
    if h == 0.0 {
        return Ok(out);
    }
    let end = t + h;
    let whole = u.floor() as u64;
    let w = Window::new(t.floor() as u64, (end + u).floor() as u64 + 1)?;
    out.value = sum_chunks(t.floor() as u64, end.ceil() as u64, |lo, hi| {
        // candidates m ∈ [lo+1, hi+whole]
        let m0 = lo + 1;
        let m1 = hi + whole + 1;
        let a: Vec<f64> = (m0..m1).map(|m| w.delta(m, m as f64)).collect();
        let b: Vec<f64> = (m0..m1).map(|m| w.delta(m, m as f64) - w.table.value(m) as f64).collect();
        let (amax, bmin) = if whole == 0 {
            (vec![f64::NEG_INFINITY; (hi - lo) as usize], vec![f64::INFINITY; (hi - lo) as usize])
        } else {
            (sliding(&a, whole as usize, |p, q| p > q), sliding(&b, whole as usize, |p, q| p < q))
        };
        let mut acc = NeumaierSum::new();
        for n in lo..hi {
            let i = (n - lo) as usize;
            for_each_piece(n, t, end, u, |n, j, pa, pb| {
                // window [n+1, n+j]
                let (hi_a, lo_b) = if j == whole {
                    (amax[i], bmin[i])
                } else {
                    let k = i + whole as usize;
                    (amax[i].max(a[k]), bmin[i].min(b[k]))
                };
                acc.add(gauss_legendre4(
                    |x| {
                        let base = w.delta(n, x);
                        let end_diff = w.diff(n, n + j, x, u);
                        let m = (hi_a - base).max(base - lo_b).max(end_diff.abs()).max(0.0);
                        m * m
                    },
                    pa,
                    pb,
                ));
            });
        }
        acc
    });
    Ok(out)
}

/// Theorem-5 style regime conditions, with C = 1 and ε = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeValueRegime {
    pub u_lower: f64,
    pub u_upper: f64,
    pub h_lower: f64,
    pub h_upper: f64,
    pub satisfied: bool,
}

pub fn large_value_regime(t: f64, h: f64, u: f64) -> LargeValueRegime {
    let l = t.ln();
    let u_lower = t.powf(131.0 / 416.0);
    let u_upper = t.sqrt() / l.powi(5);
    let h_lower = t.powf(0.25) * u * l.powi(5) * l.ln();
    let satisfied = u >= u_lower && u <= u_upper && h >= h_lower && h <= t;
    LargeValueRegime { u_lower, u_upper, h_lower, h_upper: t, satisfied }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeValueInterval {
    pub start: f64,
    pub end: f64,
    pub sign: Sign,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeValueReport {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub step: f64,
    pub positive_intervals: u64,
    pub negative_intervals: u64,
    pub interval_list: Vec<LargeValueInterval>,
    pub max_delta: f64,
    pub min_delta: f64,
    /// Spans of the longest positive and negative runs, whatever their length.
    pub longest_positive_run: f64,
    pub longest_negative_run: f64,
    pub regime: LargeValueRegime,
}

/// Default scan step as a fraction of U.
pub const DEFAULT_STEP_FRACTION: f64 = 0.25;

/// Scans Δ on T + jU/4 ≤ T + H; see [`detect_large_values_with_step`].
pub fn detect_large_values(t: f64, h: f64, u: f64, c_plus: f64, c_minus: f64) -> Result<LargeValueReport> {
    detect_large_values_with_step(t, h, u, c_plus, c_minus, DEFAULT_STEP_FRACTION * u)
}

/// Samples Δ at T + j·step, merges consecutive samples with
/// Δ ≥ c₊T^{1/4} (or Δ ≤ −c₋T^{1/4}) into runs and keeps runs whose span
/// between first and last sample is at least U.
pub fn detect_large_values_with_step(
    t: f64,
    h: f64,
    u: f64,
    c_plus: f64,
    c_minus: f64,
    step: f64,
) -> Result<LargeValueReport> {
    check_real(t, h, u)?;
    if !(c_plus > 0.0 && c_minus > 0.0) {
        return precondition("thresholds c₊ and c₋ must be positive");
    }
    if !(step > 0.0) {
        return precondition("scan step must be positive");
    }
    let end = t + h;
    let count = (h / step).floor() as u64 + 1;
    let w = Window::new(t.floor() as u64, end.floor() as u64)?;
    let xs: Vec<f64> = (0..count).map(|j| t + j as f64 * step).collect();
    let deltas: Vec<f64> = xs.par_iter().map(|&x| w.delta(x.floor() as u64, x)).collect();

    let scale = t.powf(0.25);
    let mut intervals = Vec::new();
    let mut longest = [0.0f64; 2];
    for (slot, (sign, pred)) in [
        (Sign::Positive, Box::new(|d: f64| d >= c_plus * scale) as Box<dyn Fn(f64) -> bool>),
        (Sign::Negative, Box::new(|d: f64| d <= -c_minus * scale)),
    ]
    .into_iter()
    .enumerate()
    {
        let mut j = 0usize;
        while j < deltas.len() {
            if !pred(deltas[j]) {
                j += 1;
                continue;
            }
            let start = j;
            while j + 1 < deltas.len() && pred(deltas[j + 1]) {
                j += 1;
            }
            longest[slot] = longest[slot].max(xs[j] - xs[start]);
            if xs[j] - xs[start] >= u {
                intervals.push(LargeValueInterval {
                    start: xs[start],
                    end: xs[j],
                    sign,
                    samples: (j - start + 1) as u64,
                });
            }
            j += 1;
        }
    }
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
    let positive_intervals = intervals.iter().filter(|i| i.sign == Sign::Positive).count() as u64;
    Ok(LargeValueReport {
        t,
        h,
        u,
        c_plus,
        c_minus,
        step,
        positive_intervals,
        negative_intervals: intervals.len() as u64 - positive_intervals,
        interval_list: intervals,
        max_delta: deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_delta: deltas.iter().copied().fold(f64::INFINITY, f64::min),
        longest_positive_run: longest[0],
        longest_negative_run: longest[1],
        regime: large_value_regime(t, h, u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::main_terms::EULER_GAMMA;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d_table(n: u64) -> Vec<u64> {
        let mut d = vec![0u64; n as usize + 1];
        for a in 1..=n {
            for m in (a..=n).step_by(a as usize) {
                d[m as usize] += 1;
            }
        }
        d
    }

    /// Δ(x) straight from a divisor-count table.
    fn delta_direct(d: &[u64], x: f64) -> f64 {
        let s: u64 = d[1..=x.floor() as usize].iter().sum();
        s as f64 - poly2().main(x)
    }

    #[test]
    fn discrete_small_case_matches_table() {
        let d = d_table(40);
        let oracle: f64 = (10..=20u64)
            .map(|n| {
                let v = delta_direct(&d, (n + 1) as f64) - delta_direct(&d, n as f64);
                v * v
            })
            .sum();
        let got = diff_mean_square_discrete(10, 1).unwrap();
        assert!((got.mean_square - oracle).abs() < 1e-9 * oracle, "{} vs {oracle}", got.mean_square);
        assert!(diff_mean_square_discrete(10, 0).is_err());
        assert!(diff_mean_square_discrete(100, 6).is_err());
    }

    #[test]
    fn short_interval_identity() {
        let w = Window::new(1, 200_000).unwrap();
        let d = d_table(200_000);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(2.0..190_000.0);
            let u: f64 = rng.gen_range(0.1..5_000.0);
            let lhs = w.delta((x + u).floor() as u64, x + u) - w.delta(x.floor() as u64, x);
            let block: u64 = d[x.floor() as usize + 1..=(x + u).floor() as usize].iter().sum();
            let main_inc = poly2().increment(x, u);
            let got = lhs - block as f64;
            assert!((got + main_inc).abs() <= 1e-6 * main_inc.abs().max(1.0), "x={x} u={u}");
        }
    }

    #[test]
    fn integral_zero_length_is_zero() {
        assert_eq!(diff_mean_square_integral(1e6, 0.0, 50.0).unwrap().mean_square, 0.0);
    }

    #[test]
    fn integral_matches_fine_midpoint_rule() {
        let (t, h, u) = (5_000.3, 400.0, 7.6);
        let d = d_table(6_000);
        let m = 400_000;
        let dx = h / m as f64;
        let oracle: f64 = (0..m)
            .map(|i| {
                let x = t + (i as f64 + 0.5) * dx;
                let v = delta_direct(&d, x + u) - delta_direct(&d, x);
                v * v * dx
            })
            .sum();
        let got = diff_mean_square_integral(t, h, u).unwrap().mean_square;
        assert!((got - oracle).abs() < 2e-3 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn discrete_and_integral_agree_for_wide_windows() {
        let t = 200_000u64;
        let disc = diff_mean_square_discrete(t, 64).unwrap().mean_square;
        let int = diff_mean_square_integral(t as f64, t as f64, 64.0).unwrap().mean_square;
        assert!((disc / int - 1.0).abs() < 0.05, "{disc} vs {int}");
    }

    #[test]
    fn small_angle_single_term() {
        // 4 sin²(πU/√x) ≈ 4π²U²/x when U ≪ √x
        let (t, h, u) = (1e6, 1e4, 1.0);
        let (v, _) = jutila_term(1, 1, t, h, u);
        let approx = 4.0 * PI * PI * u * u * 2.0 * ((t + h).sqrt() - t.sqrt()) / (4.0 * PI * PI);
        assert!((v / approx - 1.0).abs() < 1e-4, "{v} vs {approx}");
    }

    #[test]
    fn jutila_empty_sum() {
        let j = jutila_rhs(100.0, 100.0, 60.0).unwrap();
        assert_eq!(j.n_terms, 0);
        assert_eq!(j.value, 0.0);
    }

    #[test]
    fn jutila_gap_is_the_truncated_tail() {
        let (t, h, u) = (1e5, 1e5, 20.0);
        let lhs = diff_mean_square_integral(t, h, u).unwrap().mean_square;
        let rhs = jutila_rhs(t, h, u).unwrap();
        assert_eq!(rhs.n_terms, 2_500);
        assert!(rhs.quad_error < 1e-6 * rhs.value);
        // the diagonal sum undershoots, and lengthening it closes the gap
        let gaps: Vec<f64> = [2_500u64, 10_000, 40_000]
            .iter()
            .map(|&n| lhs - jutila_rhs_truncated(t, h, u, n).unwrap().value)
            .collect();
        assert!(gaps[0] > 0.0 && gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        let full = jutila_rhs_truncated(t, h, u, 100_000).unwrap().value;
        assert!((lhs / full - 1.0).abs() < 0.03, "{lhs} vs {full}");
    }

    #[test]
    fn sliding_extrema() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        assert_eq!(sliding(&v, 3, |a, b| a > b), vec![4.0, 4.0, 5.0, 9.0, 9.0, 9.0]);
        assert_eq!(sliding(&v, 2, |a, b| a < b), vec![1.0, 1.0, 1.0, 1.0, 5.0, 2.0, 2.0]);
        assert_eq!(sliding(&v, 1, |a, b| a > b), v.to_vec());
    }

    /// Brute force: max over a fine u-grid plus every jump point.
    fn max_window_oracle(d: &[u64], t: f64, h: f64, u: f64, m: usize) -> f64 {
        let dx = h / m as f64;
        (0..m)
            .map(|i| {
                let x = t + (i as f64 + 0.5) * dx;
                let base = delta_direct(d, x);
                let mut best = 0.0f64;
                let mut probe = |y: f64| best = best.max((delta_direct(d, y) - base).abs());
                probe(x + u);
                let mut k = x.floor() as u64 + 1;
                while (k as f64) <= x + u {
                    probe(k as f64);
                    probe(k as f64 - 1e-9);
                    k += 1;
                }
                best * best * dx
            })
            .sum()
    }

    #[test]
    fn max_window_matches_brute_force() {
        let d = d_table(3_000);
        for &(t, h, u) in &[(2_000.0, 50.0, 6.5), (2_000.25, 30.0, 0.4), (2_100.0, 40.0, 3.0)] {
            let got = max_window_stat(t, h, u).unwrap().value;
            let oracle = max_window_oracle(&d, t, h, u, 20_000);
            assert!((got / oracle - 1.0).abs() < 5e-3, "t={t} u={u}: {got} vs {oracle}");
        }
    }

    #[test]
    fn max_window_without_jumps_is_main_term_drift() {
        // no integer lies in (x, x+U] for x ∈ [T, T+H] when T+H+U < ⌊T⌋+1
        let (t, h, u) = (1e6, 0.3, 0.5);
        let v = max_window_stat(t, h, u).unwrap().value;
        let bound = h * (u * ((t + h + u).ln() + 2.0 * EULER_GAMMA)).powi(2);
        assert!(v > 0.0 && v <= bound, "{v} vs {bound}");
        // the drift is U(log x + 2γ) to first order, slightly above U log T
        let naive = h * (u * t.ln()).powi(2);
        assert!(v > naive && v < 1.2 * naive);
    }

    #[test]
    fn max_window_monotone_in_u() {
        let (t, h) = (1e5, 2e3);
        let mut last = 0.0;
        for u in [1.0, 2.5, 10.0, 40.0, 120.0] {
            let v = max_window_stat(t, h, u).unwrap().value;
            assert!(v >= last, "U={u}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn max_window_dominates_plain_mean_square() {
        let (t, h, u) = (1e5, 5e3, 30.0);
        let plain = diff_mean_square_integral(t, h, u).unwrap().mean_square;
        let mx = max_window_stat(t, h, u).unwrap().value;
        assert!(mx >= plain);
    }

    #[test]
    fn large_values_thresholds() {
        let (t, h, u) = (1e6, 1e5, 1e3);
        let r = detect_large_values(t, h, u, 1e3, 1e3).unwrap();
        assert_eq!(r.positive_intervals + r.negative_intervals, 0);
        for iv in &detect_large_values(t, h, 100.0, 0.3, 0.3).unwrap().interval_list {
            assert!(iv.end - iv.start >= 100.0 && iv.samples >= 3);
        }
    }

    #[test]
    fn large_values_sign_symmetry() {
        let (t, h, u) = (1e6, 2e4, 50.0);
        let a = detect_large_values(t, h, u, 0.4, 0.8).unwrap();
        let b = detect_large_values(t, h, u, 0.8, 0.4).unwrap();
        let c = detect_large_values(t, h, u, 0.8, 0.8).unwrap();
        assert!(a.positive_intervals >= c.positive_intervals);
        assert_eq!(b.negative_intervals, a.negative_intervals.min(b.negative_intervals).max(b.negative_intervals));
        assert_eq!(a.negative_intervals, c.negative_intervals);
        assert_eq!(b.positive_intervals, c.positive_intervals);
    }

    #[test]
    fn regime_flags_fail_at_desk_scale() {
        let r = large_value_regime(1e6, 1e5, 1e3);
        assert!(!r.satisfied);
        assert!((r.u_lower - 1e6f64.powf(0.31490384615384615)).abs() < 1e-9);
    }
}
