//! Divisor-type arithmetic functions: factorization, closed forms on prime
//! powers, and a segmented sieve producing d, d_k, ω and Ω over ranges.
//!
//! Blocks below 2^20 are filled from a shared smallest-prime-factor table.
//! Higher blocks are sieved by primes up to √hi, dividing each prime power
//! out of a per-element residual; whatever residual survives is a single
//! prime above √hi.

mod factor;
mod primes;
mod sieve;

pub use factor::{
    dk_of_factorization, dk_prime_power, factorize, is_prime, iterate_d, Factorization, SpfTable, SPF_LIMIT,
};
pub use primes::{first_primes, primes_up_to};
pub use sieve::{
    block_bounds, map_blocks, range_sum, sieve_block, sieve_range, sieve_values, DivisorBlock, FunctionKind, PrefixTable,
    DEFAULT_BLOCK_SIZE, MAX_SIEVE_HI,
};
