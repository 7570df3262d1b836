use std::sync::{Arc, Mutex, OnceLock};

/// Primes up to at least `limit`, shared across calls. The returned slice
/// may extend past `limit`; callers cut it with `partition_point`.
pub fn primes_up_to(limit: u64) -> Arc<Vec<u32>> {
    static CACHE: OnceLock<Mutex<Arc<Vec<u32>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Arc::new(eratosthenes(1 << 16))));
    let mut guard = cache.lock().expect("prime cache poisoned");
    let covered = guard.last().copied().unwrap_or(0) as u64;
    if covered < limit {
        let mut target = (covered.max(2) * 2).max(limit);
        target = target.min(u32::MAX as u64);
        *guard = Arc::new(eratosthenes(target as usize));
    }
    Arc::clone(&guard)
}

/// The first `count` primes.
pub fn first_primes(count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    // p_n < n (ln n + ln ln n) for n ≥ 6
    let n = count.max(6) as f64;
    let bound = (n * (n.ln() + n.ln().ln())).ceil() as u64 + 16;
    let primes = primes_up_to(bound);
    primes[..count].iter().map(|&p| p as u64).collect()
}

fn eratosthenes(limit: usize) -> Vec<u32> {
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::with_capacity(limit / 10 + 16);
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u32);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        let p = primes_up_to(30);
        let cut = p.partition_point(|&q| q <= 30);
        assert_eq!(&p[..cut], &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn thousandth_prime() {
        assert_eq!(first_primes(1000)[999], 7919);
        assert_eq!(first_primes(10_000)[9999], 104_729);
    }
}
