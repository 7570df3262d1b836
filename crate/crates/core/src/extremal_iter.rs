//! Iterated divisor functions: Ramanujan's and Erdős–Kátai's constructions
//! kept in factored form, record scans of d^(k), summatory iterates, and
//! the short-interval and shifted-argument sums around them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::arith_sieve::{
    factorize, first_primes, is_prime, iterate_d, map_blocks, sieve_block, FunctionKind, DEFAULT_BLOCK_SIZE,
    MAX_SIEVE_HI,
};
use crate::error::{precondition, Error, Result};
use crate::main_terms::divisor_summatory;
use crate::numeric::NeumaierSum;

/// Constant D governing max_{n≤x} log d^(2)(n), quoted to four places.
pub const ITERATED_DIVISOR_D: f64 = 2.7958;

/// Default cap on the number of prime factors a construction may hold.
pub const DEFAULT_FACTOR_BUDGET: usize = 1_000_000;

fn add_factorization(acc: &mut BTreeMap<u64, u64>, m: u64, times: u64) -> Result<()> {
    if m <= 1 {
        return Ok(());
    }
    for (q, e) in factorize(m)?.factors {
        *acc.entry(q).or_insert(0) += e as u64 * times;
    }
    Ok(())
}

fn remove_factorization(acc: &mut BTreeMap<u64, u64>, m: u64) -> Result<()> {
    if m <= 1 {
        return Ok(());
    }
    for (q, e) in factorize(m)?.factors {
        let slot = acc.get_mut(&q).expect("removing a factor that is present");
        *slot -= e as u64;
        if *slot == 0 {
            acc.remove(&q);
        }
    }
    Ok(())
}

/// An integer held as its factorization, with log n in place of n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimorialLikeNumber {
    /// (prime, exponent), primes ascending.
    pub factors: Vec<(u64, u64)>,
    pub log_n: f64,
    /// Factorization of d(n) = Π (α + 1).
    pub d_value_factors: Vec<(u64, u64)>,
}

impl PrimorialLikeNumber {
    pub fn from_factors(mut factors: Vec<(u64, u64)>) -> Result<Self> {
        factors.sort_unstable();
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return precondition("repeated prime in factor list");
        }
        if factors.iter().any(|&(p, a)| a == 0 || !is_prime(p)) {
            return precondition("factor list needs primes with positive exponents");
        }
        let log_n = factors
            .iter()
            .map(|&(p, a)| a as f64 * (p as f64).ln())
            .collect::<NeumaierSum>()
            .value();
        let mut d = BTreeMap::new();
        for &(_, a) in &factors {
            let a1 = a.checked_add(1).ok_or_else(|| Error::Overflow("exponent + 1".into()))?;
            add_factorization(&mut d, a1, 1)?;
        }
        Ok(Self { factors, log_n, d_value_factors: d.into_iter().collect() })
    }

    /// d(n) in the same representation.
    pub fn divisor_count(&self) -> Result<PrimorialLikeNumber> {
        Self::from_factors(self.d_value_factors.clone())
    }

    /// The exact value when it fits in 128 bits.
    pub fn to_u128(&self) -> Option<u128> {
        let mut acc: u128 = 1;
        for &(p, a) in &self.factors {
            let e = u32::try_from(a).ok()?;
            acc = acc.checked_mul((p as u128).checked_pow(e)?)?;
        }
        Some(acc)
    }

    /// e when n = 2^e.
    pub fn power_of_two(&self) -> Option<u64> {
        match self.factors.as_slice() {
            [] => Some(0),
            [(2, e)] => Some(*e),
            _ => None,
        }
    }

    pub fn prime_count(&self) -> usize {
        self.factors.len()
    }
}

/// k-fold iterate of d on a factored number.
pub fn iterate_factored(n: &PrimorialLikeNumber, k: u32) -> Result<PrimorialLikeNumber> {
    let mut v = n.clone();
    for _ in 0..k {
        v = v.divisor_count()?;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RamanujanNumber {
    pub k: u64,
    pub number: PrimorialLikeNumber,
    /// e with d^(2)(N) = 2^e, if d^(2)(N) is a power of two.
    pub d2_power_of_two: Option<u64>,
    /// d(N) = p_1 ⋯ p_k and d^(2)(N) = 2^k.
    pub verified: bool,
}

/// N = Π_{j≤k} p_j^{p_j − 1}, checked through factor arithmetic only.
pub fn ramanujan_number(k: u64) -> Result<RamanujanNumber> {
    if k == 0 {
        return precondition("k must be at least 1");
    }
    let primes = first_primes(k as usize);
    let number = PrimorialLikeNumber::from_factors(primes.iter().map(|&p| (p, p - 1)).collect())?;
    let d1 = number.divisor_count()?;
    let d2 = d1.divisor_count()?;
    let d1_ok = d1.factors.len() == primes.len() && d1.factors.iter().zip(&primes).all(|(&(q, e), &p)| q == p && e == 1);
    let d2_power_of_two = d2.power_of_two();
    Ok(RamanujanNumber { k, number, d2_power_of_two, verified: d1_ok && d2_power_of_two == Some(k) })
}

/// Builds N_k for k = 1..=k_max incrementally and returns, for each k, the
/// exponent e with d^(2)(N_k) = 2^e (None when not a power of two).
///
/// Adding p^{p−1} multiplies d(N) by p; d^(2) is updated by swapping the
/// factorization of β+1 for that of β+2 on the affected prime of d(N).
pub fn ramanujan_sweep(k_max: u64) -> Result<Vec<Option<u64>>> {
    let mut d1: BTreeMap<u64, u64> = BTreeMap::new();
    let mut d2: BTreeMap<u64, u64> = BTreeMap::new();
    let mut out = Vec::with_capacity(k_max as usize);
    for p in first_primes(k_max as usize) {
        // d(N) gains the factorization of (p − 1) + 1 = p
        let mut gained = BTreeMap::new();
        add_factorization(&mut gained, p, 1)?;
        for (q, e) in gained {
            let beta = d1.get(&q).copied().unwrap_or(0);
            remove_factorization(&mut d2, beta + 1)?;
            add_factorization(&mut d2, beta + e + 1, 1)?;
            d1.insert(q, beta + e);
        }
        out.push(match d2.len() {
            0 => Some(0),
            1 => d2.get(&2).copied(),
            _ => None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub k: u64,
    /// log d^(2)(N) = k log 2.
    pub lhs: f64,
    /// (√(2 log N)/log log N)·log 4.
    pub rhs: f64,
    pub holds: bool,
}

/// Ramanujan's lower bound d^(2)(N) > 4^{√(2 log N)/log log N} on N of the
/// construction, in logarithms.
pub fn ramanujan_lower_bound_check(k: u64) -> Result<LowerBoundCheck> {
    if k < 3 {
        return precondition("the comparison needs k ≥ 3");
    }
    let r = ramanujan_number(k)?;
    let e = r
        .d2_power_of_two
        .ok_or_else(|| Error::Domain("d^(2)(N) is not a power of two".into()))?;
    let lhs = e as f64 * 2f64.ln();
    let log_n = r.number.log_n;
    let rhs = (2.0 * log_n).sqrt() / log_n.ln() * 4f64.ln();
    Ok(LowerBoundCheck { k, lhs, rhs, holds: lhs > rhs })
}

/// Smallest k₀ ≥ 3 such that the lower bound holds for every k in [k₀, k_max].
pub fn ramanujan_threshold(k_max: u64) -> Result<Option<u64>> {
    let mut k0 = None;
    for k in (3..=k_max).rev() {
        if ramanujan_lower_bound_check(k)?.holds {
            k0 = Some(k);
        } else {
            break;
        }
    }
    Ok(k0)
}

/// ℓ_{−1} = 0, ℓ_0 = 1, ℓ_k = ℓ_{k−1} + ℓ_{k−2}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FibonacciTable {
    /// values[i] = ℓ_{i−1}.
    pub values: Vec<u128>,
}

impl FibonacciTable {
    /// Largest k with ℓ_k < 2^128.
    pub const K_MAX: i64 = 184;

    pub fn new(k_max: i64) -> Result<Self> {
        if !(-1..=Self::K_MAX).contains(&k_max) {
            return Err(Error::Range(format!("ℓ_k is tabulated for −1 ≤ k ≤ {}", Self::K_MAX)));
        }
        let mut values = vec![0u128];
        if k_max >= 0 {
            values.push(1);
        }
        for _ in 1..=k_max {
            let n = values.len();
            values.push(values[n - 1] + values[n - 2]);
        }
        Ok(Self { values })
    }

    pub fn get(&self, k: i64) -> Option<u128> {
        usize::try_from(k + 1).ok().and_then(|i| self.values.get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErdosKataiStep {
    pub j: u32,
    pub log_n: f64,
    pub prime_count: usize,
    /// d^(j)(N_j) = 2^r, checked by iterating d on the factorization.
    pub verified: bool,
    /// log N_j / log N_{j−1}.
    pub growth: Option<f64>,
    /// log log d^(j)(N_j) / log log N_j, to set beside 1/ℓ_j.
    pub observed_exponent: f64,
    pub ladder_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErdosKataiSequence {
    pub r: u64,
    pub depth: u32,
    pub numbers: Vec<PrimorialLikeNumber>,
    pub steps: Vec<ErdosKataiStep>,
    pub truncated: bool,
}

/// N_1 = p_1 ⋯ p_r; if N_j = Π_{i≤S} p_i^{r_i} then N_{j+1} raises the i-th
/// block of r_i fresh consecutive primes to the power p_i − 1, so that
/// d(N_{j+1}) = N_j and d^(j)(N_j) = 2^r.
pub fn erdos_katai_sequence(r: u64, depth: u32, factor_budget: usize) -> Result<ErdosKataiSequence> {
    if r == 0 || depth == 0 {
        return precondition("r and depth must be at least 1");
    }
    let fib = FibonacciTable::new(depth as i64)?;
    let mut numbers: Vec<PrimorialLikeNumber> = Vec::new();
    let mut truncated = false;
    if r as usize > factor_budget {
        truncated = true;
    } else {
        numbers.push(PrimorialLikeNumber::from_factors(first_primes(r as usize).into_iter().map(|p| (p, 1)).collect())?);
    }
    while !truncated && numbers.len() < depth as usize {
        let prev = numbers.last().unwrap();
        let needed: u64 = prev.factors.iter().map(|&(_, a)| a).sum();
        if needed > factor_budget as u64 {
            truncated = true;
            break;
        }
        let primes = first_primes(needed as usize);
        let mut factors = Vec::with_capacity(needed as usize);
        let mut next = primes.iter();
        for &(p, r_i) in &prev.factors {
            for _ in 0..r_i {
                factors.push((*next.next().unwrap(), p - 1));
            }
        }
        numbers.push(PrimorialLikeNumber::from_factors(factors)?);
    }
    let mut steps = Vec::with_capacity(numbers.len());
    for (idx, n) in numbers.iter().enumerate() {
        let j = idx as u32 + 1;
        let top = iterate_factored(n, j)?;
        let ell = fib.get(j as i64).unwrap() as f64;
        steps.push(ErdosKataiStep {
            j,
            log_n: n.log_n,
            prime_count: n.prime_count(),
            verified: top.power_of_two() == Some(r),
            growth: (idx > 0).then(|| n.log_n / numbers[idx - 1].log_n),
            observed_exponent: (r as f64 * 2f64.ln()).ln() / n.log_n.ln(),
            ladder_exponent: 1.0 / ell,
        });
    }
    Ok(ErdosKataiSequence { r, depth, numbers, steps, truncated })
}

/// d(m) for small m, used to iterate on sieved values.
struct SmallD(Vec<u32>);

impl SmallD {
    const LIMIT: usize = 1 << 16;

    fn new() -> Self {
        let mut d = vec![0u32; Self::LIMIT];
        for a in 1..Self::LIMIT {
            for m in (a..Self::LIMIT).step_by(a) {
                d[m] += 1;
            }
        }
        Self(d)
    }

    fn d(&self, m: u64) -> Result<u64> {
        match self.0.get(m as usize) {
            Some(&v) if m > 0 => Ok(v as u64),
            _ => Ok(factorize(m)?.divisor_count()),
        }
    }

    /// d^(k)(n) given d(n).
    fn iterate_from(&self, d_n: u64, k: u32) -> Result<u64> {
        let mut v = d_n;
        for _ in 1..k {
            v = self.d(v)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteratedRecord {
    pub n: u64,
    pub value: u64,
    /// log d^(2)(n)·log log n/√(log n), for k = 2.
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordScan {
    pub x_max: u64,
    pub k: u32,
    pub records: Vec<IteratedRecord>,
}

fn check_budget(x: u64) -> Result<()> {
    if x >= MAX_SIEVE_HI {
        return Err(Error::Resource(format!("x = {x} exceeds the sieve budget {MAX_SIEVE_HI}")));
    }
    Ok(())
}

/// Running maxima of d^(k)(n) over 2 ≤ n ≤ x_max. Each block reports its
/// own running maxima; replaying them in block order keeps exactly the
/// global records.
pub fn scan_iterated_max(x_max: u64, k: u32) -> Result<RecordScan> {
    if !(2..=3).contains(&k) {
        return precondition("record scans support k = 2 or 3");
    }
    if x_max < 2 {
        return precondition("x_max must be at least 2");
    }
    check_budget(x_max)?;
    let small = SmallD::new();
    let local = map_blocks(2, x_max + 1, FunctionKind::D, DEFAULT_BLOCK_SIZE, |b| {
        let mut best = 0u64;
        let mut recs = Vec::new();
        for (n, d) in b.iter() {
            let v = small.iterate_from(d, k)?;
            if v > best {
                best = v;
                recs.push((n, v));
            }
        }
        Ok(recs)
    })?;
    let mut best = 0u64;
    let mut records = Vec::new();
    for (n, value) in local.into_iter().flatten() {
        if value > best {
            best = value;
            let l = (n as f64).ln();
            let normalized = (k == 2).then(|| (value as f64).ln() * l.ln() / l.sqrt());
            records.push(IteratedRecord { n, value, normalized });
        }
    }
    Ok(RecordScan { x_max, k, records })
}

/// log_k x, the k-fold iterated natural logarithm, if every stage is positive.
pub fn iterated_log(x: f64, k: u32) -> Option<f64> {
    let mut v = x;
    for _ in 0..k {
        if v <= 0.0 {
            return None;
        }
        v = v.ln();
    }
    (v > 0.0).then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub x: u64,
    pub sum: u128,
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummatoryScan {
    pub x: u64,
    pub k: u32,
    pub sum: u128,
    pub normalized: f64,
    pub checkpoints: Vec<Checkpoint>,
}

/// Powers of ten up to x, then x itself.
pub fn decade_checkpoints(x: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(10u64), |&p| p.checked_mul(10))
        .take_while(|&p| p < x)
        .collect();
    out.push(x);
    out
}

/// Σ_{n≤c} g(n) at each checkpoint c (ascending, last = x), where g is
/// computed per block from the sieved values of `kind`.
fn summatory_at<G>(checkpoints: &[u64], kind: FunctionKind, g: G) -> Result<Vec<u128>>
where
    G: Fn(u64, &[u64]) -> Result<Vec<u64>> + Sync,
{
    let x = *checkpoints.last().unwrap();
    let parts = map_blocks(1, x + 1, kind, DEFAULT_BLOCK_SIZE, |b| {
        let vals = g(b.lo, &b.values)?;
        // partial sums at the checkpoints inside the block, then the total
        let mut inside = Vec::new();
        let mut acc = 0u128;
        let mut c = checkpoints.partition_point(|&c| c < b.lo);
        for (i, v) in vals.iter().enumerate() {
            acc += *v as u128;
            let n = b.lo + i as u64;
            while c < checkpoints.len() && checkpoints[c] == n {
                inside.push((c, acc));
                c += 1;
            }
        }
        Ok((inside, acc))
    })?;
    let mut out = vec![0u128; checkpoints.len()];
    let mut base = 0u128;
    for (inside, total) in parts {
        for (c, partial) in inside {
            out[c] = base + partial;
        }
        base += total;
    }
    Ok(out)
}

/// Σ_{n≤x} d^(k)(n) with the normalisation sum/(x log_k x).
pub fn sum_iterated(x: u64, k: u32) -> Result<SummatoryScan> {
    if !(2..=4).contains(&k) {
        return precondition("sum_iterated supports k = 2, 3, 4");
    }
    let lk = iterated_log(x as f64, k)
        .ok_or_else(|| Error::Domain(format!("log_{k} x is not positive at x = {x}")))?;
    check_budget(x)?;
    let small = SmallD::new();
    let cps = decade_checkpoints(x);
    let sums = summatory_at(&cps, FunctionKind::D, |_, vals| {
        vals.iter().map(|&d| small.iterate_from(d, k)).collect()
    })?;
    let sum = *sums.last().unwrap();
    let checkpoints = cps
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| Checkpoint { x: c, sum: s, normalized: iterated_log(c as f64, k).map(|l| s as f64 / (c as f64 * l)) })
        .collect();
    Ok(SummatoryScan { x, k, sum, normalized: sum as f64 / (x as f64 * lk), checkpoints })
}

/// The shift f(n) in Σ d(n + f(n)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IvicVariant {
    D,
    Omega,
    BigOmega,
    Dk(u32),
}

impl IvicVariant {
    fn kind(self) -> FunctionKind {
        match self {
            IvicVariant::D => FunctionKind::D,
            IvicVariant::Omega => FunctionKind::Omega,
            IvicVariant::BigOmega => FunctionKind::BigOmega,
            IvicVariant::Dk(k) => FunctionKind::Dk(k),
        }
    }
}

impl fmt::Display for IvicVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IvicVariant::D => f.write_str("d"),
            IvicVariant::Omega => f.write_str("omega"),
            IvicVariant::BigOmega => f.write_str("bigomega"),
            IvicVariant::Dk(k) => write!(f, "dk:{k}"),
        }
    }
}

impl FromStr for IvicVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<FunctionKind>()? {
            FunctionKind::Omega => Ok(IvicVariant::Omega),
            FunctionKind::BigOmega => Ok(IvicVariant::BigOmega),
            FunctionKind::Dk(2) => Ok(IvicVariant::D),
            FunctionKind::Dk(k) => Ok(IvicVariant::Dk(k)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvicScan {
    pub x: u64,
    pub variant: IvicVariant,
    pub sum: u128,
    /// sum/(x log x).
    pub b_estimate: f64,
    pub checkpoints: Vec<Checkpoint>,
}

/// Σ_{n≤x} d(n + f(n)) with f = d by default.
pub fn ivic_conjecture_scan(x: u64, variant: IvicVariant) -> Result<IvicScan> {
    if x < 2 {
        return precondition("x must be at least 2");
    }
    check_budget(x)?;
    let cps = decade_checkpoints(x);
    let sums = summatory_at(&cps, variant.kind(), |lo, fvals| {
        let reach = fvals.iter().max().copied().unwrap_or(0);
        let hi = lo
            .checked_add(fvals.len() as u64 + reach)
            .filter(|&h| h < MAX_SIEVE_HI)
            .ok_or_else(|| Error::Resource("shifted argument leaves the sieve budget".into()))?;
        let d = sieve_block(lo, hi, FunctionKind::D)?;
        Ok(fvals.iter().enumerate().map(|(i, &f)| d[i + f as usize]).collect())
    })?;
    let sum = *sums.last().unwrap();
    let norm = |c: u64, s: u128| s as f64 / (c as f64 * (c as f64).ln());
    Ok(IvicScan {
        x,
        variant,
        sum,
        b_estimate: norm(x, sum),
        checkpoints: cps.iter().zip(&sums).map(|(&c, &s)| Checkpoint { x: c, sum: s, normalized: Some(norm(c, s)) }).collect(),
    })
}

/// Interval length f(x) in the short-interval divisor sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum ShortRegime {
    /// f(x) = (log x)^{2 log 2 − 1} exp(h √(log log x)).
    Super { h: f64 },
    /// f(x) = (log x)^{2 log 2 − 1} exp(c √(log log x)).
    Sub { c: f64 },
    /// f(x) = x.
    Full,
}

impl ShortRegime {
    pub const DEFAULT_H: f64 = 3.5;
    pub const DEFAULT_C: f64 = 0.5;

    pub fn length(self, x: f64) -> f64 {
        let l = x.ln();
        let base = l.powf(2.0 * 2f64.ln() - 1.0);
        match self {
            ShortRegime::Super { h } => base * (h * l.ln().sqrt()).exp(),
            ShortRegime::Sub { c } => base * (c * l.ln().sqrt()).exp(),
            ShortRegime::Full => x,
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x5eed_d1f5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortIntervalSample {
    pub x: u64,
    pub length: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErdosShortReport {
    pub window: u64,
    pub samples: usize,
    pub regime: ShortRegime,
    pub delta: f64,
    pub seed: u64,
    /// Share of samples with |ratio − 1| ≤ δ.
    pub fraction: f64,
    pub mean_ratio: f64,
    pub length_at_window: f64,
    pub draws: Vec<ShortIntervalSample>,
}

/// Draws x uniformly from [W, 2W) and forms Σ_{n≤f(x)} d(x+n)/(f(x) log x).
pub fn erdos_short_interval_check(
    window: u64,
    samples: usize,
    regime: ShortRegime,
    delta: f64,
    seed: u64,
) -> Result<ErdosShortReport> {
    if samples < 100 {
        return precondition("at least 100 samples are required");
    }
    if window < 16 {
        return precondition("window must be at least 16");
    }
    if !(delta > 0.0) {
        return precondition("δ must be positive");
    }
    let reach = match regime {
        ShortRegime::Full => 4 * window,
        _ => 2 * window + regime.length(2.0 * window as f64).ceil() as u64 + 1,
    };
    check_budget(reach)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<u64> = (0..samples).map(|_| rng.gen_range(window..2 * window)).collect();
    let draws: Vec<ShortIntervalSample> = xs
        .par_iter()
        .map(|&x| {
            let xf = x as f64;
            let length = regime.length(xf);
            let m = length.floor() as u64;
            let s: u128 = match regime {
                ShortRegime::Full => divisor_summatory(2 * x) - divisor_summatory(x),
                _ if m == 0 => 0,
                _ => sieve_block(x + 1, x + m + 1, FunctionKind::D)?.iter().map(|&v| v as u128).sum(),
            };
            Ok(ShortIntervalSample { x, length, ratio: s as f64 / (length * xf.ln()) })
        })
        .collect::<Result<_>>()?;
    let hits = draws.iter().filter(|d| (d.ratio - 1.0).abs() <= delta).count();
    let mean_ratio = draws.iter().map(|d| d.ratio).sum::<f64>() / samples as f64;
    Ok(ErdosShortReport {
        window,
        samples,
        regime,
        delta,
        seed,
        fraction: hits as f64 / samples as f64,
        mean_ratio,
        length_at_window: regime.length(window as f64),
        draws,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DkPlusSum {
    pub x: u64,
    pub k: u64,
    pub sum: u128,
    /// sum/(k x log x).
    pub normalized: f64,
}

/// Σ_{n≤x} max_{0≤h<k} d(n+h).
pub fn dk_plus_sum(x: u64, k: u64) -> Result<DkPlusSum> {
    if k == 0 || x < k {
        return precondition("need k ≥ 1 and x ≥ k");
    }
    check_budget(x + k)?;
    let starts: Vec<u64> = (1..=x).step_by(DEFAULT_BLOCK_SIZE).collect();
    let parts: Vec<u128> = starts
        .par_iter()
        .map(|&s| {
            let e = (s + DEFAULT_BLOCK_SIZE as u64).min(x + 1);
            let d = sieve_block(s, e + k - 1, FunctionKind::D)?;
            let k = k as usize;
            // sliding maximum over windows d[i..i+k]
            let mut dq = std::collections::VecDeque::new();
            let mut acc = 0u128;
            for i in 0..d.len() {
                while dq.back().is_some_and(|&b: &usize| d[b] <= d[i]) {
                    dq.pop_back();
                }
                dq.push_back(i);
                if dq[0] + k <= i {
                    dq.pop_front();
                }
                if i + 1 >= k {
                    acc += d[dq[0]] as u128;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let sum: u128 = parts.iter().sum();
    let normalized = if x >= 2 { sum as f64 / (k as f64 * x as f64 * (x as f64).ln()) } else { f64::NAN };
    Ok(DkPlusSum { x, k, sum, normalized })
}

/// d^(k)(n) by repeated factorization.
pub fn iterated_divisor(n: u64, k: u32) -> Result<u64> {
    iterate_d(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d_naive(n: u64) -> u64 {
        (1..=n).filter(|a| n % a == 0).count() as u64
    }

    #[test]
    fn ramanujan_small_cases() {
        let r1 = ramanujan_number(1).unwrap();
        assert_eq!(r1.number.to_u128(), Some(2));
        assert_eq!(r1.d2_power_of_two, Some(1));
        let r2 = ramanujan_number(2).unwrap();
        assert_eq!(r2.number.to_u128(), Some(18));
        assert_eq!(r2.number.divisor_count().unwrap().to_u128(), Some(6));
        assert_eq!(r2.d2_power_of_two, Some(2));
        let r3 = ramanujan_number(3).unwrap();
        let want = 2f64.ln() + 2.0 * 3f64.ln() + 4.0 * 5f64.ln();
        assert!((r3.number.log_n - want).abs() < 1e-12);
        assert_eq!(r3.d2_power_of_two, Some(3));
        assert!(r1.verified && r2.verified && r3.verified);
    }

    #[test]
    fn ramanujan_sweep_agrees_with_direct_construction() {
        let sweep = ramanujan_sweep(300).unwrap();
        for k in [1u64, 2, 7, 50, 299, 300] {
            let r = ramanujan_number(k).unwrap();
            assert!(r.verified);
            assert_eq!(sweep[k as usize - 1], r.d2_power_of_two);
        }
        assert!(sweep.iter().enumerate().all(|(i, e)| *e == Some(i as u64 + 1)));
    }

    #[test]
    fn factored_divisor_count_matches_integers() {
        for n in 2..3_000u64 {
            let f = factorize(n).unwrap();
            let p = PrimorialLikeNumber::from_factors(f.factors.iter().map(|&(q, a)| (q, a as u64)).collect()).unwrap();
            assert_eq!(p.to_u128(), Some(n as u128));
            assert_eq!(p.divisor_count().unwrap().to_u128(), Some(d_naive(n) as u128));
            assert!((p.log_n - (n as f64).ln()).abs() < 1e-12);
        }
        assert!(PrimorialLikeNumber::from_factors(vec![(4, 1)]).is_err());
        assert!(PrimorialLikeNumber::from_factors(vec![(3, 0)]).is_err());
    }

    #[test]
    fn lower_bound_holds_from_small_k() {
        let small = ramanujan_lower_bound_check(3).unwrap();
        assert!(small.lhs.is_finite() && small.rhs.is_finite());
        assert_eq!(ramanujan_threshold(400).unwrap(), Some(5));
        // lhs/rhs behaves like log(k log k)/log k: above 1, peaking near
        // k = 30 and then decaying slowly
        let ratio = |k| {
            let c = ramanujan_lower_bound_check(k).unwrap();
            c.lhs / c.rhs
        };
        for k in 10..=100 {
            assert!(ratio(k) > 1.0, "k = {k}");
        }
        assert!(ratio(30) > ratio(10) && ratio(30) > ratio(100));
        assert!(ratio(1000) < ratio(100) && ratio(1000) > 1.0);
        assert!(ramanujan_lower_bound_check(2).is_err());
    }

    #[test]
    fn fibonacci_matches_binet() {
        let t = FibonacciTable::new(40).unwrap();
        assert_eq!(t.get(-1), Some(0));
        assert_eq!(t.get(0), Some(1));
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        for k in -1..=40i64 {
            // ℓ_k is the (k+1)-th Fibonacci number in the F_0 = 0 convention
            let binet = (phi.powi(k as i32 + 1) / 5f64.sqrt()).round() as u128;
            assert_eq!(t.get(k), Some(binet), "k = {k}");
        }
        assert!(FibonacciTable::new(FibonacciTable::K_MAX).is_ok());
        assert!(FibonacciTable::new(FibonacciTable::K_MAX + 1).is_err());
    }

    #[test]
    fn erdos_katai_examples() {
        let s = erdos_katai_sequence(2, 1, DEFAULT_FACTOR_BUDGET).unwrap();
        assert_eq!(s.numbers[0].to_u128(), Some(6));
        assert_eq!(s.numbers[0].divisor_count().unwrap().to_u128(), Some(4));
        let s = erdos_katai_sequence(3, 2, DEFAULT_FACTOR_BUDGET).unwrap();
        assert!(s.steps.iter().all(|st| st.verified));
        // N_2 is Ramanujan's number for k = 3
        assert_eq!(s.numbers[1].factors, vec![(2, 1), (3, 2), (5, 4)]);
        assert!(!s.truncated);
    }

    #[test]
    fn erdos_katai_chain_property() {
        let s = erdos_katai_sequence(3, 5, DEFAULT_FACTOR_BUDGET).unwrap();
        assert_eq!(s.numbers.len(), 5);
        for w in s.numbers.windows(2) {
            assert_eq!(w[1].divisor_count().unwrap().factors, w[0].factors);
        }
        for st in &s.steps {
            assert!(st.verified, "{st:?}");
            if let Some(g) = st.growth {
                assert!(g.is_finite() && g > 1.0);
            }
        }
    }

    #[test]
    fn erdos_katai_budget_truncates() {
        let s = erdos_katai_sequence(3, 12, 500).unwrap();
        assert!(s.truncated);
        assert!(s.numbers.len() < 12);
        assert!(s.steps.iter().all(|st| st.verified));
    }

    #[test]
    fn record_scan_to_hundred() {
        let scan = scan_iterated_max(100, 2).unwrap();
        // exhaustive oracle
        let mut best = 0;
        let mut want = Vec::new();
        for n in 2..=100u64 {
            let v = d_naive(d_naive(n));
            if v > best {
                best = v;
                want.push((n, v));
            }
        }
        let got: Vec<(u64, u64)> = scan.records.iter().map(|r| (r.n, r.value)).collect();
        assert_eq!(got, want);
        assert!(got.contains(&(60, 6)));
        let two = scan_iterated_max(2, 2).unwrap();
        assert_eq!(two.records.len(), 1);
        assert_eq!((two.records[0].n, two.records[0].value), (2, 2));
    }

    #[test]
    fn record_scan_across_blocks_matches_factorization() {
        let x = 300_000u64;
        for k in [2u32, 3] {
            let scan = scan_iterated_max(x, k).unwrap();
            let mut best = 0;
            let mut want = Vec::new();
            for n in 2..=x {
                let v = iterate_d(n, k).unwrap();
                if v > best {
                    best = v;
                    want.push((n, v));
                }
            }
            let got: Vec<(u64, u64)> = scan.records.iter().map(|r| (r.n, r.value)).collect();
            assert_eq!(got, want, "k = {k}");
        }
    }

    #[test]
    fn sum_iterated_small_and_domain() {
        let s = sum_iterated(10, 2).unwrap();
        let want: u128 = (1..=10u64).map(|n| d_naive(d_naive(n)) as u128).sum();
        assert_eq!(s.sum, want);
        assert!(matches!(sum_iterated(100, 4), Err(Error::Domain(_))));
        assert!(sum_iterated(100, 5).is_err());
    }

    #[test]
    fn sum_iterated_checkpoints_match_direct_sums() {
        let s = sum_iterated(123_457, 3).unwrap();
        for c in &s.checkpoints {
            let want: u128 = (1..=c.x).map(|n| iterate_d(n, 3).unwrap() as u128).sum();
            assert_eq!(c.sum, want, "x = {}", c.x);
        }
    }

    #[test]
    fn shifted_by_d_small_oracle() {
        let want: u128 = (1..=10u64).map(|n| d_naive(n + d_naive(n)) as u128).sum();
        assert_eq!(ivic_conjecture_scan(10, IvicVariant::D).unwrap().sum, want);
        let want: u128 = (1..=5_000u64)
            .map(|n| {
                let w = factorize(n).unwrap().omega() as u64;
                d_naive(n + w) as u128
            })
            .sum();
        assert_eq!(ivic_conjecture_scan(5_000, IvicVariant::Omega).unwrap().sum, want);
    }

    #[test]
    fn shift_variant_parsing() {
        assert_eq!("omega".parse::<IvicVariant>().unwrap(), IvicVariant::Omega);
        assert_eq!("dk:3".parse::<IvicVariant>().unwrap(), IvicVariant::Dk(3));
        assert_eq!("d".parse::<IvicVariant>().unwrap(), IvicVariant::D);
        assert_eq!(IvicVariant::Dk(4).to_string(), "dk:4");
    }

    #[test]
    fn dk_plus_examples() {
        assert_eq!(dk_plus_sum(4, 2).unwrap().sum, 10);
        let one = dk_plus_sum(1_000, 1).unwrap();
        assert_eq!(one.sum, divisor_summatory(1_000));
        let x = 200_000u64;
        let d: Vec<u64> = (0..=x + 3).map(|n| if n == 0 { 0 } else { iterate_d(n, 1).unwrap() }).collect();
        let want: u128 = (1..=x as usize).map(|n| *d[n..n + 3].iter().max().unwrap() as u128).sum();
        assert_eq!(dk_plus_sum(x, 3).unwrap().sum, want);
        assert!(dk_plus_sum(2, 3).is_err());
    }

    #[test]
    fn dk_plus_normalized_band() {
        let s = dk_plus_sum(1_000_000, 3).unwrap();
        assert!((0.5..=1.5).contains(&s.normalized), "{}", s.normalized);
    }

    #[test]
    fn full_interval_ratio_near_one() {
        let r = erdos_short_interval_check(100_000_000, 100, ShortRegime::Full, 0.1, DEFAULT_SEED).unwrap();
        assert_eq!(r.fraction, 1.0, "mean ratio {}", r.mean_ratio);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = erdos_short_interval_check(1_000_000, 100, ShortRegime::Super { h: 3.5 }, 0.25, 9).unwrap();
        let b = erdos_short_interval_check(1_000_000, 100, ShortRegime::Super { h: 3.5 }, 0.25, 9).unwrap();
        assert_eq!(a, b);
        assert!(erdos_short_interval_check(1_000_000, 99, ShortRegime::Full, 0.1, 9).is_err());
    }
}
