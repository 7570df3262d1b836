use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use super::factor::{dk_prime_power, SpfTable};
use super::primes::primes_up_to;
use crate::error::{precondition, Error, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 1 << 16;

/// Largest exclusive upper bound accepted by the sieve. Sieving primes run
/// to √hi, so this keeps the prime table near two million entries.
pub const MAX_SIEVE_HI: u64 = 1 << 42;

/// Arithmetic function carried by a [`DivisorBlock`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FunctionKind {
    /// d_k; `Dk(2)` is the ordinary divisor function.
    Dk(u32),
    Omega,
    BigOmega,
}

impl FunctionKind {
    pub const D: FunctionKind = FunctionKind::Dk(2);

    fn validate(self) -> Result<()> {
        match self {
            FunctionKind::Dk(0) => precondition("d_k requires k ≥ 1"),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionKind::Dk(2) => write!(f, "d"),
            FunctionKind::Dk(k) => write!(f, "dk:{k}"),
            FunctionKind::Omega => write!(f, "omega"),
            FunctionKind::BigOmega => write!(f, "bigomega"),
        }
    }
}

impl FromStr for FunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(FunctionKind::D),
            "omega" => Ok(FunctionKind::Omega),
            "bigomega" => Ok(FunctionKind::BigOmega),
            other => {
                let k = other
                    .strip_prefix("dk:")
                    .and_then(|k| k.parse::<u32>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| {
                        Error::Precondition(format!(
                            "unknown function kind '{other}' (expected d, dk:K, omega, bigomega)"
                        ))
                    })?;
                Ok(FunctionKind::Dk(k))
            }
        }
    }
}

/// Contiguous run [lo, hi) of sieved function values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivisorBlock {
    pub lo: u64,
    pub hi: u64,
    pub kind: FunctionKind,
    pub values: Vec<u64>,
}

impl DivisorBlock {
    pub fn value(&self, n: u64) -> u64 {
        self.values[(n - self.lo) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (self.lo..self.hi).zip(self.values.iter().copied())
    }

    pub fn sum(&self) -> u128 {
        self.values.iter().map(|&v| v as u128).sum()
    }
}

/// How prime powers combine into the function value.
#[derive(Clone)]
enum Combiner {
    /// multiplicative: value(p^α) = table[α]
    Product(Vec<Option<u64>>),
    /// ω: +1 per prime
    CountPrimes,
    /// Ω: +α per prime
    CountWithMultiplicity,
}

impl Combiner {
    fn new(kind: FunctionKind) -> Self {
        match kind {
            FunctionKind::Dk(k) => Combiner::Product((0..64).map(|a| dk_prime_power(k, a)).collect()),
            FunctionKind::Omega => Combiner::CountPrimes,
            FunctionKind::BigOmega => Combiner::CountWithMultiplicity,
        }
    }

    fn identity(&self) -> u64 {
        match self {
            Combiner::Product(_) => 1,
            _ => 0,
        }
    }

    #[inline]
    fn combine(&self, acc: u64, alpha: u32, n: u64) -> Result<u64> {
        match self {
            Combiner::Product(table) => table[alpha as usize]
                .and_then(|v| acc.checked_mul(v))
                .ok_or_else(|| Error::Overflow(format!("function value at n = {n} exceeds u64"))),
            Combiner::CountPrimes => Ok(acc + 1),
            Combiner::CountWithMultiplicity => Ok(acc + alpha as u64),
        }
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn validate_range(lo: u64, hi: u64, block_size: usize) -> Result<()> {
    if lo < 1 || lo >= hi {
        return precondition(format!("sieve range requires 1 ≤ lo < hi, got [{lo}, {hi})"));
    }
    if block_size < 2 {
        return precondition("block size must be at least 2");
    }
    if hi > MAX_SIEVE_HI {
        return Err(Error::Range(format!(
            "upper bound {hi} exceeds the sieve limit {MAX_SIEVE_HI}"
        )));
    }
    Ok(())
}

/// Values of `kind` on [lo, hi) as a single buffer.
fn fill(lo: u64, hi: u64, combiner: &Combiner, primes: &[u32]) -> Result<Vec<u64>> {
    let len = (hi - lo) as usize;
    let mut vals = vec![combiner.identity(); len];
    let spf = SpfTable::shared();
    if hi <= spf.limit() {
        for (i, v) in vals.iter_mut().enumerate() {
            let n = lo + i as u64;
            let mut acc = *v;
            let mut err = None;
            spf.for_each_prime_power(n, |_, a| match combiner.combine(acc, a, n) {
                Ok(x) => acc = x,
                Err(e) => err = Some(e),
            });
            if let Some(e) = err {
                return Err(e);
            }
            *v = acc;
        }
        return Ok(vals);
    }

    let mut rem: Vec<u64> = (lo..hi).collect();
    let root = isqrt(hi - 1);
    for &p in primes.iter().take_while(|&&p| p as u64 <= root) {
        let p = p as u64;
        let first = lo.div_ceil(p) * p;
        let mut m = first;
        while m < hi {
            let i = (m - lo) as usize;
            let mut r = rem[i] / p;
            let mut a = 1;
            while r % p == 0 {
                r /= p;
                a += 1;
            }
            rem[i] = r;
            vals[i] = combiner.combine(vals[i], a, m)?;
            m += p;
        }
    }
    for (i, r) in rem.into_iter().enumerate() {
        if r > 1 {
            vals[i] = combiner.combine(vals[i], 1, lo + i as u64)?;
        }
    }
    Ok(vals)
}

/// Block boundaries covering [lo, hi) with at most `block_size` per block.
pub fn block_bounds(lo: u64, hi: u64, block_size: usize) -> Vec<(u64, u64)> {
    let bs = block_size as u64;
    let mut out = Vec::with_capacity(((hi - lo) / bs + 1) as usize);
    let mut a = lo;
    while a < hi {
        let b = (a + bs).min(hi);
        out.push((a, b));
        a = b;
    }
    out
}

/// Sieves [lo, hi) block by block, applying `f` to each block in parallel.
/// Results come back in block order whatever the worker count.
pub fn map_blocks<T, F>(lo: u64, hi: u64, kind: FunctionKind, block_size: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&DivisorBlock) -> Result<T> + Sync,
{
    kind.validate()?;
    validate_range(lo, hi, block_size)?;
    let combiner = Combiner::new(kind);
    let primes = primes_up_to(isqrt(hi - 1) + 1);
    block_bounds(lo, hi, block_size)
        .into_par_iter()
        .map(|(a, b)| {
            let values = fill(a, b, &combiner, &primes)?;
            f(&DivisorBlock { lo: a, hi: b, kind, values })
        })
        .collect()
}

/// Values on [lo, hi) computed on the calling thread as one block.
pub fn sieve_block(lo: u64, hi: u64, kind: FunctionKind) -> Result<Vec<u64>> {
    kind.validate()?;
    validate_range(lo, hi, 2)?;
    let primes = primes_up_to(isqrt(hi - 1) + 1);
    fill(lo, hi, &Combiner::new(kind), &primes)
}

/// Sieves [lo, hi) into blocks of at most `block_size` values.
pub fn sieve_range(lo: u64, hi: u64, kind: FunctionKind, block_size: usize) -> Result<Vec<DivisorBlock>> {
    map_blocks(lo, hi, kind, block_size, |b| Ok(b.clone()))
}

/// Values on [lo, hi) as one vector.
pub fn sieve_values(lo: u64, hi: u64, kind: FunctionKind) -> Result<Vec<u64>> {
    let parts = map_blocks(lo, hi, kind, DEFAULT_BLOCK_SIZE, |b| Ok(b.values.clone()))?;
    Ok(parts.concat())
}

/// Σ_{lo ≤ n < hi} value(n).
pub fn range_sum(lo: u64, hi: u64, kind: FunctionKind) -> Result<u128> {
    if lo >= hi {
        return Ok(0);
    }
    Ok(map_blocks(lo, hi, kind, DEFAULT_BLOCK_SIZE, |b| Ok(b.sum()))?.into_iter().sum())
}

/// Cumulative sums S(n) = Σ_{m ≤ n} value(m) for n ∈ [lo − 1, hi − 1],
/// anchored by a caller-supplied S(lo − 1).
#[derive(Debug, Clone)]
pub struct PrefixTable {
    lo: u64,
    sums: Vec<u64>,
}

impl PrefixTable {
    pub fn build(lo: u64, hi: u64, kind: FunctionKind, base: u128) -> Result<Self> {
        let blocks = map_blocks(lo, hi, kind, DEFAULT_BLOCK_SIZE, |b| Ok(b.values.clone()))?;
        let mut sums = Vec::with_capacity((hi - lo + 1) as usize);
        let base = u64::try_from(base).map_err(|_| Error::Overflow("prefix base exceeds u64".into()))?;
        sums.push(base);
        let mut acc = base;
        for v in blocks.iter().flatten() {
            acc = acc
                .checked_add(*v)
                .ok_or_else(|| Error::Overflow("prefix sum exceeds u64".into()))?;
            sums.push(acc);
        }
        Ok(Self { lo, sums })
    }

    /// Table anchored at the origin (S(0) = 0).
    pub fn from_origin(hi: u64, kind: FunctionKind) -> Result<Self> {
        Self::build(1, hi, kind, 0)
    }

    /// S(n) for lo − 1 ≤ n ≤ hi − 1.
    #[inline]
    pub fn get(&self, n: u64) -> u64 {
        self.sums[(n + 1 - self.lo) as usize]
    }

    /// value(n) = S(n) − S(n − 1).
    #[inline]
    pub fn value(&self, n: u64) -> u64 {
        self.get(n) - self.get(n - 1)
    }

    /// Smallest and one-past-largest n with S(n) available.
    pub fn covered(&self) -> (u64, u64) {
        (self.lo - 1, self.lo - 1 + self.sums.len() as u64)
    }

    pub fn contains(&self, n: u64) -> bool {
        let (a, b) = self.covered();
        n >= a && n < b
    }
}
