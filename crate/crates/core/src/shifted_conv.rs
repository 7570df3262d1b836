//! Shifted-convolution sums Σ d_k(n) d_k(n+f), their log-polynomial main
//! terms (fitted, never hard-coded), Ramanujan sums and a pluggable
//! singular-series evaluator.
//!
//! Two range conventions are in use and every record names its mode:
//! `UptoN` sums over 1 ≤ n ≤ N, `Dyadic` over N < n ≤ 2N.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::arith_sieve::{factorize, sieve_block, FunctionKind, DEFAULT_BLOCK_SIZE};
use crate::error::{precondition, Error, Result};
use crate::numeric::{fit_polynomial, NeumaierSum};

/// Largest shift accepted; the sieve window per block is block + shift.
pub const MAX_SHIFT: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    UptoN,
    Dyadic,
}

impl RangeMode {
    /// Half-open range [lo, hi) of n for this mode at N.
    pub fn bounds(self, n: u64) -> (u64, u64) {
        match self {
            RangeMode::UptoN => (1, n + 1),
            RangeMode::Dyadic => (n + 1, 2 * n + 1),
        }
    }
}

impl fmt::Display for RangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RangeMode::UptoN => "upto",
            RangeMode::Dyadic => "dyadic",
        })
    }
}

impl FromStr for RangeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upto" | "upto_N" | "upto_n" => Ok(RangeMode::UptoN),
            "dyadic" => Ok(RangeMode::Dyadic),
            _ => Err(Error::Precondition(format!("unknown range mode '{s}' (expected upto or dyadic)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftedSumRecord {
    #[serde(rename = "N")]
    pub n: u64,
    pub f: u64,
    pub k: u32,
    pub mode: RangeMode,
    pub sum: u128,
    pub fitted_main: f64,
    pub residual: f64,
}

fn check_k(k: u32) -> Result<()> {
    if !(2..=6).contains(&k) {
        return precondition(format!("k must lie in 2..=6, got {k}"));
    }
    Ok(())
}

/// Σ_{n∈[s,e)} v(n) Σ_{h=h_lo}^{h_hi} v(n+h) for one block, sieved in one pass.
fn window_block(kind: FunctionKind, s: u64, e: u64, h_lo: u64, h_hi: u64) -> Result<u128> {
    let vals = sieve_block(s, e + h_hi, kind)?;
    let len = (e - s) as usize;
    let (h_lo, h_hi) = (h_lo as usize, h_hi as usize);
    let overflow = || Error::Overflow(format!("shifted sum on [{s}, {e}) exceeds 128 bits"));
    let mut acc: u128 = 0;
    if h_lo == h_hi {
        for i in 0..len {
            acc = acc
                .checked_add(vals[i] as u128 * vals[i + h_lo] as u128)
                .ok_or_else(overflow)?;
        }
        return Ok(acc);
    }
    // prefix[j] = Σ_{i<j} vals[i]
    let mut prefix = Vec::with_capacity(vals.len() + 1);
    prefix.push(0u128);
    for &v in &vals {
        let last = *prefix.last().unwrap();
        prefix.push(last + v as u128);
    }
    for i in 0..len {
        let inner = prefix[i + h_hi + 1] - prefix[i + h_lo];
        let term = (vals[i] as u128).checked_mul(inner).ok_or_else(overflow)?;
        acc = acc.checked_add(term).ok_or_else(overflow)?;
    }
    Ok(acc)
}

/// Window sums over consecutive elementary segments [cuts[i], cuts[i+1]).
/// Blocks run in parallel; results are reduced in block order.
fn segment_sums(kind: FunctionKind, cuts: &[u64], h_lo: u64, h_hi: u64) -> Result<Vec<u128>> {
    let mut jobs = Vec::new();
    for (seg, w) in cuts.windows(2).enumerate() {
        let mut s = w[0];
        while s < w[1] {
            let e = (s + DEFAULT_BLOCK_SIZE as u64).min(w[1]);
            jobs.push((seg, s, e));
            s = e;
        }
    }
    let partial: Vec<(usize, u128)> = jobs
        .par_iter()
        .map(|&(seg, s, e)| window_block(kind, s, e, h_lo, h_hi).map(|v| (seg, v)))
        .collect::<Result<_>>()?;
    let mut out = vec![0u128; cuts.len().saturating_sub(1)];
    for (seg, v) in partial {
        out[seg] = out[seg]
            .checked_add(v)
            .ok_or_else(|| Error::Overflow("shifted sum exceeds 128 bits".into()))?;
    }
    Ok(out)
}

/// Σ_{n in range(N)} v(n) Σ_{h_lo≤h≤h_hi} v(n+h) for each N, from one pass
/// over the union of the ranges split at every range endpoint.
fn windowed_sums(kind: FunctionKind, ns: &[u64], mode: RangeMode, h_lo: u64, h_hi: u64) -> Result<Vec<u128>> {
    if ns.is_empty() {
        return Ok(Vec::new());
    }
    if h_lo == 0 || h_hi < h_lo {
        return precondition("shifts must satisfy 1 ≤ h_lo ≤ h_hi");
    }
    if h_hi > MAX_SHIFT {
        return Err(Error::Range(format!("shift {h_hi} exceeds the supported maximum {MAX_SHIFT}")));
    }
    let mut cuts: Vec<u64> = ns
        .iter()
        .flat_map(|&n| {
            let (a, b) = mode.bounds(n);
            [a, b]
        })
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    let segs = segment_sums(kind, &cuts, h_lo, h_hi)?;
    // cumulative[i] = Σ over [cuts[0], cuts[i])
    let mut cumulative = vec![0u128; cuts.len()];
    for i in 0..segs.len() {
        cumulative[i + 1] = cumulative[i]
            .checked_add(segs[i])
            .ok_or_else(|| Error::Overflow("shifted sum exceeds 128 bits".into()))?;
    }
    let at = |c: u64| cumulative[cuts.binary_search(&c).expect("cut point present")];
    Ok(ns
        .iter()
        .map(|&n| {
            let (a, b) = mode.bounds(n);
            at(b) - at(a)
        })
        .collect())
}

/// Σ d_k(n) d_k(n+f) over the range of `mode` at N.
pub fn shifted_sum(k: u32, n: u64, f: u64, mode: RangeMode) -> Result<u128> {
    Ok(shifted_sums(k, &[n], f, mode)?[0])
}

/// Shifted sums at several N sharing one sieve pass.
pub fn shifted_sums(k: u32, ns: &[u64], f: u64, mode: RangeMode) -> Result<Vec<u128>> {
    check_k(k)?;
    if f == 0 {
        return precondition("shift f must be at least 1");
    }
    if ns.iter().any(|&n| n == 0) {
        return precondition("N must be at least 1");
    }
    windowed_sums(FunctionKind::Dk(k), ns, mode, f, f)
}

/// Σ_{h≤H} Σ_n d_k(n) d_k(n+h) over the range of `mode`, for each N.
pub fn shift_averaged_sums(k: u32, ns: &[u64], h_max: u64, mode: RangeMode) -> Result<Vec<u128>> {
    check_k(k)?;
    if h_max == 0 {
        return precondition("H must be at least 1");
    }
    if ns.iter().any(|&n| n == 0) {
        return precondition("N must be at least 1");
    }
    windowed_sums(FunctionKind::Dk(k), ns, mode, 1, h_max)
}

/// Least-squares fit of sum/N against 1, log N, …, log^{2k−2} N.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftedFit {
    pub k: u32,
    pub f: u64,
    pub mode: RangeMode,
    /// coeffs[j] multiplies log^j N.
    pub coeffs: Vec<f64>,
    pub records: Vec<ShiftedSumRecord>,
    pub max_rel_residual: f64,
    pub condition: f64,
}

impl ShiftedFit {
    /// Fitted main term N·P(log N).
    pub fn main_term(&self, n: f64) -> f64 {
        n * self.coeffs.iter().rev().fold(0.0, |acc, c| acc * n.ln() + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InghamFit {
    pub f: u64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

fn check_checkpoints(k: u32, checkpoints: &[u64]) -> Result<()> {
    let need = 2 * k as usize - 1;
    if checkpoints.len() < need {
        return Err(Error::Conditioning(format!(
            "a degree-{} fit needs at least {need} checkpoints, got {}",
            2 * k - 2,
            checkpoints.len()
        )));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return precondition("checkpoints must be strictly increasing");
    }
    let (lo, hi) = (checkpoints[0], *checkpoints.last().unwrap());
    if hi < 10 * lo {
        return Err(Error::Conditioning(format!(
            "checkpoints span [{lo}, {hi}] is narrower than a factor of 10"
        )));
    }
    Ok(())
}

/// Fit from sums already computed at `checkpoints`, e.g. to refit
/// sub-windows of one sieve pass.
pub fn fit_from_sums(k: u32, f: u64, mode: RangeMode, checkpoints: &[u64], sums: &[u128]) -> Result<ShiftedFit> {
    check_k(k)?;
    check_checkpoints(k, checkpoints)?;
    if sums.len() != checkpoints.len() {
        return precondition("one sum per checkpoint is required");
    }
    fit_sums(k, f, mode, checkpoints, sums)
}

fn fit_sums(k: u32, f: u64, mode: RangeMode, checkpoints: &[u64], sums: &[u128]) -> Result<ShiftedFit> {
    let ts: Vec<f64> = checkpoints.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = checkpoints.iter().zip(sums).map(|(&n, &s)| s as f64 / n as f64).collect();
    let fit = fit_polynomial(&ts, &ys, 2 * k as usize - 2)?;
    let records: Vec<ShiftedSumRecord> = checkpoints
        .iter()
        .zip(sums)
        .zip(&fit.residuals)
        .zip(&ys)
        .map(|(((&n, &sum), &r), &y)| {
            let fitted_main = (y - r) * n as f64;
            ShiftedSumRecord { n, f, k, mode, sum, fitted_main, residual: sum as f64 - fitted_main }
        })
        .collect();
    let max_rel_residual = records
        .iter()
        .map(|r| (r.residual / r.sum as f64).abs())
        .fold(0.0, f64::max);
    Ok(ShiftedFit { k, f, mode, coeffs: fit.coeffs, records, max_rel_residual, condition: fit.condition })
}

/// Fits the degree-(2k−2) log-polynomial main term of the shifted sum.
pub fn fit_shifted(k: u32, f: u64, checkpoints: &[u64], mode: RangeMode) -> Result<ShiftedFit> {
    check_k(k)?;
    check_checkpoints(k, checkpoints)?;
    let sums = shifted_sums(k, checkpoints, f, mode)?;
    fit_sums(k, f, mode, checkpoints, &sums)
}

/// Ingham-shape fit c1 log²N + c2 log N + c3 of D(N;f)/N with n ≤ N.
pub fn fit_ingham(f: u64, checkpoints: &[u64]) -> Result<(InghamFit, ShiftedFit)> {
    let fit = fit_shifted(2, f, checkpoints, RangeMode::UptoN)?;
    let c = &fit.coeffs;
    Ok((InghamFit { f, c1: c[2], c2: c[1], c3: c[0] }, fit))
}

/// Default checkpoints for the averaged sum at N: N·2^{−j/2}, j = 0..=10.
pub fn default_checkpoints(n: u64) -> Result<Vec<u64>> {
    let mut cps: Vec<u64> = (0..=10)
        .map(|j| (n as f64 * 2f64.powf(-(j as f64) / 2.0)).round() as u64)
        .collect();
    cps.reverse();
    cps.dedup();
    if cps[0] < 2 || cps.len() < 11 {
        return precondition(format!("N = {n} is too small for a 32-fold checkpoint window"));
    }
    *cps.last_mut().unwrap() = n;
    Ok(cps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedDelta {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "H")]
    pub h_max: u64,
    /// Σ_{h≤H} Δ₃(N;h).
    pub value: f64,
    /// H² and N^{4/3}, the two branches of the bound.
    pub h_squared: f64,
    pub n_four_thirds: f64,
    pub fit: ShiftedFit,
}

impl AveragedDelta {
    pub fn h_squared_dominates(&self) -> bool {
        self.h_squared >= self.n_four_thirds
    }
}

fn check_averaged(n: u64, h_max: u64) -> Result<()> {
    if h_max == 0 || h_max > n {
        return precondition(format!("need 1 ≤ H ≤ N, got H = {h_max}, N = {n}"));
    }
    Ok(())
}

/// Σ_{h≤H} Δ₃(N;h) over N < n ≤ 2N, each Δ₃ taken against its own fitted
/// degree-4 main term on `checkpoints` (which must end at N).
///
/// Least squares is linear in the data, so the sum of per-shift residuals
/// equals the residual of the fit to the shift-aggregated sums; only the
/// aggregate is computed.
pub fn averaged_delta3_with(n: u64, h_max: u64, checkpoints: &[u64]) -> Result<AveragedDelta> {
    check_averaged(n, h_max)?;
    check_checkpoints(3, checkpoints)?;
    if *checkpoints.last().unwrap() != n {
        return precondition("the last checkpoint must equal N");
    }
    let sums = shift_averaged_sums(3, checkpoints, h_max, RangeMode::Dyadic)?;
    let mut fit = fit_sums(3, h_max, RangeMode::Dyadic, checkpoints, &sums)?;
    // the aggregate record carries H in the shift slot
    let value = fit.records.last().unwrap().residual;
    fit.f = h_max;
    Ok(AveragedDelta {
        n,
        h_max,
        value,
        h_squared: (h_max as f64).powi(2),
        n_four_thirds: (n as f64).powf(4.0 / 3.0),
        fit,
    })
}

/// [`averaged_delta3_with`] on [`default_checkpoints`].
pub fn averaged_delta3(n: u64, h_max: u64) -> Result<AveragedDelta> {
    check_averaged(n, h_max)?;
    averaged_delta3_with(n, h_max, &default_checkpoints(n)?)
}

/// Δ_k(N;h) over N < n ≤ 2N against a fitted main term on `checkpoints`
/// ending at N.
pub fn delta_k_shift(k: u32, h: u64, checkpoints: &[u64]) -> Result<f64> {
    let fit = fit_shifted(k, h, checkpoints, RangeMode::Dyadic)?;
    Ok(fit.records.last().unwrap().residual)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RamanujanSum {
    pub q: u64,
    pub h: u64,
    pub value: i128,
}

/// c_q(h) = Σ_{d | (h,q)} d μ(q/d), with (0, q) = q.
pub fn ramanujan_sum(q: u64, h: u64) -> Result<RamanujanSum> {
    if q == 0 {
        return precondition("q must be at least 1");
    }
    let g = gcd(h, q);
    let mut value: i128 = 0;
    for d in factorize(g)?.divisors() {
        value += d as i128 * factorize(q / d)?.mobius() as i128;
    }
    Ok(RamanujanSum { q, h, value })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSeries {
    pub h: u64,
    pub q_max: u64,
    pub value: f64,
    /// Bound on Σ_{q>Q_max} |c_q(h)|/q², to be scaled by sup |Q|².
    pub tail_bound: f64,
}

pub const DEFAULT_Q_MAX: u64 = 10_000;

/// Σ_{q≤Q_max} c_q(h) q^{−2} Q(q)² for a caller-supplied Q(q) = Q_k(x, q).
/// No default Q is provided: its coefficients are not known in closed form.
pub fn singular_series<Q: Fn(u64) -> f64>(h: u64, q_max: u64, q_factor: Q) -> Result<SingularSeries> {
    if h == 0 {
        return precondition("shift h must be at least 1");
    }
    if q_max == 0 {
        return precondition("Q_max must be at least 1");
    }
    let mut acc = NeumaierSum::new();
    for q in 1..=q_max {
        let c = ramanujan_sum(q, h)?.value as f64;
        if c != 0.0 {
            let qf = q_factor(q);
            acc.add(c / (q as f64 * q as f64) * qf * qf);
        }
    }
    Ok(SingularSeries { h, q_max, value: acc.value(), tail_bound: singular_tail_bound(h, q_max)? })
}

/// Σ_{d|h} (1/d)·min(ζ(2), 1/⌊Q_max/d⌋), which dominates
/// Σ_{q>Q_max} σ((h,q))/q² since Σ_{m>M} m^{−2} < 1/M.
pub fn singular_tail_bound(h: u64, q_max: u64) -> Result<f64> {
    let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
    Ok(factorize(h)?
        .divisors()
        .into_iter()
        .map(|d| {
            let m = q_max / d;
            let tail = if m == 0 { zeta2 } else { zeta2.min(1.0 / m as f64) };
            tail / d as f64
        })
        .sum())
}
