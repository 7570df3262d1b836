//! Residue main terms x·p_{k−1}(log x), the error terms Δ_k(x) and their
//! mean squares.
//!
//! With w = s − 1 the Laurent expansion of ζ at its pole is
//!
//! ```text
//! ζ(s) = 1/w + Σ_{j≥0} (−1)^j γ_j / j! · w^j
//! ```
//!
//! (γ_j the Stieltjes constants), so ζ(s)^k = w^{−k} F(w)^k with
//! F(w) = 1 + Σ_j (−1)^j γ_j / j! · w^{j+1}. Multiplying by
//! x^{s−1}/s = e^{w log x}/(1 + w) and reading off the coefficient of
//! w^{k−1} gives p_{k−1}(log x). The expansion is carried out symbolically
//! in the γ_j with exact rational coefficients and evaluated afterwards.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

use crate::arith_sieve::{map_blocks, range_sum, FunctionKind, DEFAULT_BLOCK_SIZE};
use crate::error::{precondition, Error, Result};
use crate::numeric::{gauss_legendre4, NeumaierSum};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;
pub const STIELTJES_1: f64 = -0.072_815_845_483_676_724_860_586_375_874_9;
pub const STIELTJES_2: f64 = -0.009_690_363_192_872_318_484_530_386_035_21;
pub const STIELTJES_3: f64 = 0.002_053_834_420_303_345_866_160_046_542_75;
pub const STIELTJES_4: f64 = 0.002_325_370_065_467_300_057_468_170_177_53;
pub const STIELTJES_5: f64 = 0.000_793_323_817_301_062_701_753_334_877_444;

/// Largest x for which Σ_{n≤x} d_k(n) is sieved on request.
pub const SUMMATORY_BUDGET: u64 = 1 << 34;

type Rational = Ratio<i128>;

/// Laurent data of ζ at s = 1: γ_0, …, γ_{order−1}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaurentCoeffs {
    pub gammas: Vec<f64>,
}

impl LaurentCoeffs {
    pub fn embedded() -> Self {
        Self {
            gammas: vec![EULER_GAMMA, STIELTJES_1, STIELTJES_2, STIELTJES_3, STIELTJES_4, STIELTJES_5],
        }
    }

    pub fn order(&self) -> usize {
        self.gammas.len()
    }
}

impl Default for LaurentCoeffs {
    fn default() -> Self {
        Self::embedded()
    }
}

/// Polynomial in γ_0, γ_1, … with rational coefficients. Monomials are
/// exponent vectors (trailing zeros trimmed).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GammaPoly {
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl GammaPoly {
    pub fn constant(c: Rational) -> Self {
        let mut p = GammaPoly::default();
        p.add_term(Vec::new(), c);
        p
    }

    /// c · γ_j
    pub fn gamma(j: usize, c: Rational) -> Self {
        let mut mono = vec![0; j + 1];
        mono[j] = 1;
        let mut p = GammaPoly::default();
        p.add_term(mono, c);
        p
    }

    fn add_term(&mut self, mut mono: Vec<u32>, c: Rational) {
        while mono.last() == Some(&0) {
            mono.pop();
        }
        let entry = self.terms.entry(mono).or_insert_with(|| Rational::from_integer(0));
        *entry += c;
        if *entry == Rational::from_integer(0) {
            self.terms.retain(|_, v| *v != Rational::from_integer(0));
        }
    }

    pub fn add(&self, other: &GammaPoly) -> GammaPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn scale(&self, c: Rational) -> GammaPoly {
        let mut out = GammaPoly::default();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), *v * c);
        }
        out
    }

    pub fn mul(&self, other: &GammaPoly) -> GammaPoly {
        let mut out = GammaPoly::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let len = m1.len().max(m2.len());
                let mono: Vec<u32> = (0..len)
                    .map(|i| m1.get(i).copied().unwrap_or(0) + m2.get(i).copied().unwrap_or(0))
                    .collect();
                out.add_term(mono, *c1 * *c2);
            }
        }
        out
    }

    /// Highest γ index appearing, if any.
    pub fn max_gamma_index(&self) -> Option<usize> {
        self.terms.keys().filter(|m| !m.is_empty()).map(|m| m.len() - 1).max()
    }

    pub fn coefficient(&self, mono: &[u32]) -> Rational {
        let mut m = mono.to_vec();
        while m.last() == Some(&0) {
            m.pop();
        }
        self.terms.get(&m).copied().unwrap_or_else(|| Rational::from_integer(0))
    }

    pub fn eval(&self, gammas: &[f64]) -> f64 {
        let mut acc = NeumaierSum::new();
        for (mono, c) in &self.terms {
            let mut v = *c.numer() as f64 / *c.denom() as f64;
            for (j, &e) in mono.iter().enumerate() {
                v *= gammas[j].powi(e as i32);
            }
            acc.add(v);
        }
        acc.value()
    }
}

impl fmt::Display for GammaPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (mono, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (j, &e) in mono.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "·γ{j}")?,
                    _ => write!(f, "·γ{j}^{e}")?,
                }
            }
        }
        Ok(())
    }
}

/// p_{k−1}(z) with coefficients left symbolic in the γ_j.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicMainTerm {
    pub k: u32,
    /// coeffs[j] multiplies z^j.
    pub coeffs: Vec<GammaPoly>,
}

impl SymbolicMainTerm {
    /// Number of Stieltjes constants the coefficients actually reference.
    pub fn gammas_used(&self) -> usize {
        self.coeffs.iter().filter_map(|c| c.max_gamma_index()).max().map_or(0, |j| j + 1)
    }
}

fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

/// Symbolic residue of ζ^k(s) x^{s−1}/s at s = 1, as a polynomial in z = log x.
pub fn residue_poly_symbolic(k: u32) -> Result<SymbolicMainTerm> {
    if k == 0 {
        return precondition("residue polynomial requires k ≥ 1");
    }
    let deg = k as usize - 1;
    // F(w) truncated at w^deg: F = 1 + Σ_{j≥0} (−1)^j γ_j/j! w^{j+1}
    let mut f_series: Vec<GammaPoly> = vec![GammaPoly::constant(Rational::from_integer(1))];
    for j in 0..deg {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        f_series.push(GammaPoly::gamma(j, Rational::new(sign, factorial(j as u32))));
    }
    // F^k
    let mut power = vec![GammaPoly::default(); deg + 1];
    power[0] = GammaPoly::constant(Rational::from_integer(1));
    for _ in 0..k {
        let mut next = vec![GammaPoly::default(); deg + 1];
        for (i, a) in power.iter().enumerate() {
            for (j, b) in f_series.iter().enumerate() {
                if i + j <= deg {
                    next[i + j] = next[i + j].add(&a.mul(b));
                }
            }
        }
        power = next;
    }
    // [w^deg] F^k · Σ z^m w^m/m! · Σ (−w)^i
    let mut coeffs = Vec::with_capacity(deg + 1);
    for m in 0..=deg {
        let mut c = GammaPoly::default();
        for i in 0..=(deg - m) {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            c = c.add(&power[deg - m - i].scale(Rational::from_integer(sign)));
        }
        coeffs.push(c.scale(Rational::new(1, factorial(m as u32))));
    }
    Ok(SymbolicMainTerm { k, coeffs })
}

/// p_{k−1}(z) = Σ coeffs[j] z^j with numeric coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainTermPoly {
    pub k: u32,
    pub coeffs: Vec<f64>,
}

impl MainTermPoly {
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    /// x · p_{k−1}(log x).
    pub fn main(&self, x: f64) -> f64 {
        x * self.eval(x.ln())
    }

    /// main(x + u) − main(x) without cancellation between the two mains.
    pub fn increment(&self, x: f64, u: f64) -> f64 {
        let l0 = x.ln();
        let eps = (u / x).ln_1p();
        let l1 = l0 + eps;
        // p(l1) − p(l0) = Σ c_j (l1^j − l0^j), each difference factored by ε
        let mut dp = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            let mut s = 0.0;
            for i in 0..j {
                s += l1.powi(i as i32) * l0.powi((j - 1 - i) as i32);
            }
            dp += c * eps * s;
        }
        u * self.eval(l1) + x * dp
    }
}

/// Numeric p_{k−1} from the given Laurent data.
pub fn residue_poly(k: u32, laurent: &LaurentCoeffs) -> Result<MainTermPoly> {
    if laurent.order() < k as usize {
        return Err(Error::InsufficientOrder { required: k as usize, available: laurent.order() });
    }
    let sym = residue_poly_symbolic(k)?;
    let coeffs = sym.coeffs.iter().map(|c| c.eval(&laurent.gammas)).collect();
    Ok(MainTermPoly { k, coeffs })
}

/// Known exponent data for the mean square of Δ_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentTable {
    pub k: u32,
    /// (k − 1)/(2k)
    pub beta_lower: (i64, i64),
    pub beta_known_upper: (i64, i64),
    pub alpha_known_upper: Option<(i64, i64)>,
}

pub fn exponent_table(k: u32) -> Result<ExponentTable> {
    let upper = match k {
        1 => Ratio::new(0, 1),
        2 => Ratio::new(1, 4),
        3 => Ratio::new(1, 3),
        4 => Ratio::new(3, 8),
        5 => Ratio::new(9, 20),
        6 => Ratio::new(1, 2),
        _ => return Err(Error::Domain(format!("no tabulated mean-square exponent for k = {k}"))),
    };
    let lower = Ratio::new(k as i64 - 1, 2 * k as i64);
    debug_assert!(lower <= upper && upper < Ratio::from_integer(1));
    Ok(ExponentTable {
        k,
        beta_lower: (*lower.numer(), *lower.denom()),
        beta_known_upper: (*upper.numer(), *upper.denom()),
        alpha_known_upper: None,
    })
}

/// Σ_{n≤x} d(n) by the hyperbola method, O(√x).
pub fn divisor_summatory(x: u64) -> u128 {
    if x == 0 {
        return 0;
    }
    let mut r = (x as f64).sqrt() as u64;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    let s: u128 = (1..=r).map(|d| (x / d) as u128).sum();
    2 * s - (r as u128) * (r as u128)
}

/// Σ_{n≤x} d_k(n) by sieving.
pub fn summatory_dk(x: u64, k: u32) -> Result<u128> {
    if x > SUMMATORY_BUDGET {
        return Err(Error::Resource(format!("x = {x} exceeds the summatory budget {SUMMATORY_BUDGET}")));
    }
    if x == 0 {
        return Ok(0);
    }
    range_sum(1, x + 1, FunctionKind::Dk(k))
}

/// One evaluation of Δ_k(x) = Σ_{n≤x} d_k(n) − x p_{k−1}(log x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSample {
    pub x: f64,
    pub k: u32,
    pub exact_sum: u128,
    pub main: f64,
    pub delta: f64,
}

/// Δ_k from an already known summatory value at x.
pub fn delta_from_sum(x: f64, exact_sum: u128, poly: &MainTermPoly) -> ErrorSample {
    let main = poly.main(x);
    ErrorSample { x, k: poly.k, exact_sum, main, delta: exact_sum as f64 - main }
}

pub fn delta_k(x: f64, k: u32, poly: &MainTermPoly) -> Result<ErrorSample> {
    if !(x >= 1.0) {
        return precondition(format!("Δ_k(x) requires x ≥ 1, got {x}"));
    }
    if poly.k != k {
        return precondition(format!("main-term polynomial is for k = {}, not {k}", poly.k));
    }
    if x > SUMMATORY_BUDGET as f64 {
        return Err(Error::Resource(format!("x = {x} exceeds the summatory budget {SUMMATORY_BUDGET}")));
    }
    let sum = summatory_dk(x.floor() as u64, k)?;
    Ok(delta_from_sum(x, sum, poly))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MeanSquareMode {
    /// Unit pieces [n, n+1) on which the summatory part is constant.
    Exact,
    /// Midpoint rule with the given number of nodes.
    Sampled { samples: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSquare {
    pub k: u32,
    pub x_max: f64,
    pub mode: MeanSquareMode,
    pub value: f64,
}

/// Per-block partial sums, then the running offset S(a − 1) for each block.
fn block_offsets(hi: u64, kind: FunctionKind) -> Result<Vec<u128>> {
    let sums = map_blocks(1, hi, kind, DEFAULT_BLOCK_SIZE, |b| Ok(b.sum()))?;
    let mut offs = Vec::with_capacity(sums.len());
    let mut acc = 0u128;
    for s in sums {
        offs.push(acc);
        acc += s;
    }
    Ok(offs)
}

/// ∫_1^X Δ_k(x)² dx.
///
/// Exact mode integrates each unit piece by four-point Gauss–Legendre in the
/// offset t = x − n, with Δ written as (S(n) − main(n)) − increment(n, t);
/// the integrand is analytic on the piece, so the rule is exact to rounding.
pub fn mean_square_delta(k: u32, x_max: f64, mode: MeanSquareMode, poly: &MainTermPoly) -> Result<MeanSquare> {
    if poly.k != k {
        return precondition(format!("main-term polynomial is for k = {}, not {k}", poly.k));
    }
    if !(x_max >= 1.0) {
        return precondition(format!("mean square requires X ≥ 1, got {x_max}"));
    }
    if let MeanSquareMode::Sampled { samples } = mode {
        if samples < 100 {
            return precondition("sampled mode requires at least 100 samples");
        }
    }
    if x_max > SUMMATORY_BUDGET as f64 {
        return Err(Error::Resource(format!("X = {x_max} exceeds the summatory budget")));
    }
    let last = x_max.floor() as u64;
    if x_max == 1.0 {
        return Ok(MeanSquare { k, x_max, mode, value: 0.0 });
    }
    let kind = FunctionKind::Dk(k);
    let hi = last + 1;
    let offsets = block_offsets(hi, kind)?;

    let piece = |n: u64, s_n: u128, len: f64| -> f64 {
        let nf = n as f64;
        let base = s_n as f64 - poly.main(nf);
        gauss_legendre4(
            |t| {
                let d = base - poly.increment(nf, t);
                d * d
            },
            0.0,
            len,
        )
    };

    let partials: Vec<NeumaierSum> = match mode {
        MeanSquareMode::Exact => {
            let blocks = map_blocks(1, hi, kind, DEFAULT_BLOCK_SIZE, |b| Ok((b.lo, b.values.clone())))?;
            blocks
                .into_par_iter()
                .zip(offsets.into_par_iter())
                .map(|((lo, values), off)| {
                    let mut acc = NeumaierSum::new();
                    let mut s = off;
                    for (i, v) in values.into_iter().enumerate() {
                        let n = lo + i as u64;
                        s += v as u128;
                        let len = if n < last { 1.0 } else { x_max - n as f64 };
                        if len > 0.0 {
                            acc.add(piece(n, s, len));
                        }
                    }
                    acc
                })
                .collect()
        }
        MeanSquareMode::Sampled { samples } => {
            let h = (x_max - 1.0) / samples as f64;
            let node = |i: u64| 1.0 + (i as f64 + 0.5) * h;
            let blocks = map_blocks(1, hi, kind, DEFAULT_BLOCK_SIZE, |b| Ok((b.lo, b.hi, b.values.clone())))?;
            blocks
                .into_par_iter()
                .zip(offsets.into_par_iter())
                .map(|((lo, bhi, values), off)| {
                    let mut acc = NeumaierSum::new();
                    // prefix within the block
                    let mut pref = Vec::with_capacity(values.len());
                    let mut s = off;
                    for v in &values {
                        s += *v as u128;
                        pref.push(s);
                    }
                    let start = (((lo as f64 - 1.0) / h - 0.5).floor().max(0.0)) as u64;
                    let mut i = start;
                    while i < samples {
                        let x = node(i);
                        let n = x.floor() as u64;
                        if n >= bhi {
                            break;
                        }
                        if n >= lo {
                            let d = pref[(n - lo) as usize] as f64 - poly.main(x);
                            acc.add(d * d * h);
                        }
                        i += 1;
                    }
                    acc
                })
                .collect()
        }
    };
    let mut total = NeumaierSum::new();
    for p in &partials {
        total.merge(p);
    }
    Ok(MeanSquare { k, x_max, mode, value: total.value() })
}
