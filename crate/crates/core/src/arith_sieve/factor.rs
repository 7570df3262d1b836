use serde::Serialize;
use std::sync::OnceLock;

use super::primes::primes_up_to;
use crate::error::{Error, Result};

/// Canonical prime-power decomposition of n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Factorization {
    pub n: u64,
    /// (p, α) sorted by p, α ≥ 1.
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().map(|&(_, a)| a as u64 + 1).product()
    }

    pub fn omega(&self) -> u32 {
        self.factors.len() as u32
    }

    pub fn big_omega(&self) -> u32 {
        self.factors.iter().map(|&(_, a)| a).sum()
    }

    pub fn mobius(&self) -> i64 {
        if self.factors.iter().any(|&(_, a)| a > 1) {
            0
        } else if self.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn euler_phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, a)| (p - 1) * p.pow(a - 1))
            .product()
    }

    /// σ(n) = Σ_{d|n} d.
    pub fn sigma(&self) -> u128 {
        self.factors
            .iter()
            .map(|&(p, a)| {
                let p = p as u128;
                (p.pow(a + 1) - 1) / (p - 1)
            })
            .product()
    }

    /// All divisors, ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut out = vec![1u64];
        for &(p, a) in &self.factors {
            let len = out.len();
            let mut pk = 1u64;
            for _ in 0..a {
                pk *= p;
                for i in 0..len {
                    out.push(out[i] * pk);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_valid(&self) -> bool {
        let mut prod: u128 = 1;
        for w in self.factors.windows(2) {
            if w[0].0 >= w[1].0 {
                return false;
            }
        }
        for &(p, a) in &self.factors {
            if a == 0 || !is_prime(p) {
                return false;
            }
            prod *= (p as u128).pow(a);
        }
        prod == self.n as u128
    }
}

/// Smallest-prime-factor table for the origin block.
pub struct SpfTable {
    spf: Vec<u32>,
}

pub const SPF_LIMIT: u64 = 1 << 20;

impl SpfTable {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit.max(2)];
        for i in 2..spf.len() {
            if spf[i] == 0 {
                let mut j = i;
                while j < spf.len() {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        Self { spf }
    }

    pub fn shared() -> &'static SpfTable {
        static TABLE: OnceLock<SpfTable> = OnceLock::new();
        TABLE.get_or_init(|| SpfTable::new(SPF_LIMIT as usize))
    }

    pub fn limit(&self) -> u64 {
        self.spf.len() as u64
    }

    /// Calls `visit(p, α)` for each prime power exactly dividing n.
    #[inline]
    pub fn for_each_prime_power(&self, mut n: u64, mut visit: impl FnMut(u64, u32)) {
        debug_assert!(n < self.limit());
        while n > 1 {
            let p = self.spf[n as usize] as u64;
            let mut a = 0;
            while n % p == 0 {
                n /= p;
                a += 1;
            }
            visit(p, a);
        }
    }
}

pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::Precondition("factorize requires n ≥ 1".into()));
    }
    let mut factors = Vec::new();
    let spf = SpfTable::shared();
    if n < spf.limit() {
        spf.for_each_prime_power(n, |p, a| factors.push((p, a)));
        return Ok(Factorization { n, factors });
    }
    let mut m = n;
    let small = primes_up_to(1000);
    for &p in small.iter().take_while(|&&p| p <= 1000) {
        let p = p as u64;
        if p * p > m {
            break;
        }
        let mut a = 0;
        while m % p == 0 {
            m /= p;
            a += 1;
        }
        if a > 0 {
            factors.push((p, a));
        }
    }
    if m > 1 {
        let mut big = Vec::new();
        split_large(m, &mut big);
        big.sort_unstable();
        for p in big {
            match factors.last_mut() {
                Some((q, a)) if *q == p => *a += 1,
                _ => factors.push((p, 1)),
            }
        }
    }
    Ok(Factorization { n, factors })
}

fn split_large(m: u64, out: &mut Vec<u64>) {
    if m == 1 {
        return;
    }
    if is_prime(m) {
        out.push(m);
        return;
    }
    let d = pollard_brent(m);
    split_large(d, out);
    split_large(m / d, out);
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller–Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A non-trivial factor of the odd composite m.
fn pollard_brent(m: u64) -> u64 {
    if m % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, m) + c) % m;
        let (mut x, mut y, mut g, mut q) = (2u64, 2u64, 1u64, 1u64);
        let mut ys = 2u64;
        let mut r = 1u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..(r - k).min(128) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), m);
                }
                g = gcd(q, m);
                k += 128;
            }
            r *= 2;
        }
        if g == m {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), m);
                if g > 1 {
                    break;
                }
            }
        }
        if g != m {
            return g;
        }
        c += 1;
    }
}

/// d_k(p^α) = C(k + α − 1, α).
pub fn dk_prime_power(k: u32, alpha: u32) -> Option<u64> {
    let mut c: u128 = 1;
    for i in 1..=alpha as u128 {
        c = c.checked_mul(k as u128 + i - 1)? / i;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as u64)
}

/// d_k(n) from the factorization of n.
pub fn dk_of_factorization(f: &Factorization, k: u32) -> Result<u64> {
    if k == 0 {
        return Err(Error::Precondition("d_k requires k ≥ 1".into()));
    }
    let mut acc = 1u64;
    for &(_, a) in &f.factors {
        let v = dk_prime_power(k, a)
            .ok_or_else(|| Error::Overflow(format!("d_{k}(p^{a}) exceeds u64")))?;
        acc = acc
            .checked_mul(v)
            .ok_or_else(|| Error::Overflow(format!("d_{k}({}) exceeds u64", f.n)))?;
    }
    Ok(acc)
}

/// k-fold iterate d^(k)(n).
pub fn iterate_d(n: u64, k: u32) -> Result<u64> {
    if n == 0 || k == 0 {
        return Err(Error::Precondition("iterate_d requires n ≥ 1 and k ≥ 1".into()));
    }
    let mut v = n;
    for _ in 0..k {
        if v <= 2 {
            break;
        }
        v = factorize(v)?.divisor_count();
    }
    Ok(v)
}
