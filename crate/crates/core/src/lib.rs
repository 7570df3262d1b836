//! Numerical laboratory for the Dirichlet divisor problem.
//!
//! Exact sieving of d(n), d_k(n), ω(n), Ω(n); the residue main terms
//! x·p_{k−1}(log x) and error terms Δ_k(x); the truncated Voronoï series;
//! shifted convolution sums Σ d_k(n) d_k(n+h); statistics of
//! Δ(x+U) − Δ(x) on short intervals; and scans over iterated divisor
//! functions.

pub mod arith_sieve;
pub mod error;
pub mod extremal_iter;
pub mod main_terms;
pub mod numeric;
pub mod shifted_conv;
pub mod short_intervals;
pub mod voronoi;

pub use error::{Error, Result};
