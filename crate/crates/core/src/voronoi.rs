//! Truncated Voronoï series for Δ(x):
//!
//! ```text
//! Δ(x) ≈ x^{1/4}/(π√2) · Σ_{n≤N} d(n) n^{−3/4} cos(4π√(nx) − π/4)
//! ```
//!
//! The phase is reduced in turns, 2√(nx) − 1/8 mod 1, with √(nx) carried
//! in double-double so that large n·x keeps its fractional digits.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::arith_sieve::{sieve_values, FunctionKind, PrefixTable};
use crate::error::{precondition, Result};
use crate::main_terms::{delta_from_sum, divisor_summatory, MainTermPoly};
use crate::numeric::{frac_turns_of_sqrt, NeumaierSum};

/// Terms per partition of the cosine sum; fixed so the reduction order
/// does not depend on the worker count.
const TERM_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoronoiEval {
    pub x: f64,
    pub n_terms: u64,
    pub approx: f64,
    pub exact: f64,
    pub abs_err: f64,
}

/// d(1..=N), the coefficient table of the series.
pub fn divisor_table(n_terms: u64) -> Result<Vec<u64>> {
    sieve_values(1, n_terms + 1, FunctionKind::D)
}

/// The n-th term, d(n) n^{−3/4} cos(4π√(nx) − π/4) scaled by x^{1/4}/(π√2).
#[inline]
pub fn voronoi_term(x: f64, n: u64, d_n: u64) -> f64 {
    let turns = frac_turns_of_sqrt(n as f64, x, 2.0, -0.125);
    let amp = x.powf(0.25) / (PI * SQRT_2) * d_n as f64 * (n as f64).powf(-0.75);
    amp * (2.0 * PI * turns).cos()
}

/// Σ_{n≤N} of the series at x, where `d_table[n−1] = d(n)` and N = len.
pub fn voronoi_sum(x: f64, d_table: &[u64]) -> f64 {
    let partials: Vec<NeumaierSum> = d_table
        .par_chunks(TERM_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = (c * TERM_CHUNK) as u64 + 1;
            chunk
                .iter()
                .enumerate()
                .map(|(i, &d)| voronoi_term(x, base + i as u64, d))
                .collect()
        })
        .collect();
    let mut acc = NeumaierSum::new();
    for p in &partials {
        acc.merge(p);
    }
    acc.value()
}

fn check_args(x: f64, n_terms: u64, d_table: &[u64]) -> Result<()> {
    if !(x >= 2.0) {
        return precondition(format!("Voronoï evaluation requires x ≥ 2, got {x}"));
    }
    if n_terms < 2 {
        return precondition("truncation length N must be at least 2");
    }
    if n_terms as f64 > x {
        return precondition(format!("truncation N = {n_terms} exceeds x = {x}; the series needs N ≪ x"));
    }
    if (d_table.len() as u64) < n_terms {
        return precondition("divisor table shorter than N");
    }
    Ok(())
}

/// Truncated series at x compared with the exact Δ(x) (inclusive at integers).
pub fn delta_voronoi(x: f64, n_terms: u64, d_table: &[u64], poly: &MainTermPoly) -> Result<VoronoiEval> {
    check_args(x, n_terms, d_table)?;
    if poly.k != 2 {
        return precondition("the Voronoï series is for Δ = Δ_2");
    }
    let approx = voronoi_sum(x, &d_table[..n_terms as usize]);
    let exact = delta_from_sum(x, divisor_summatory(x.floor() as u64), poly).delta;
    Ok(VoronoiEval { x, n_terms, approx, exact, abs_err: (approx - exact).abs() })
}

/// Half-integer evaluation points m + 1/2 spread over [xmin, xmax).
pub fn half_integer_grid(xmin: f64, xmax: f64, count: usize) -> Vec<f64> {
    let step = (xmax - xmin) / count as f64;
    (0..count).map(|i| (xmin + i as f64 * step).floor() + 0.5).collect()
}

/// Evaluates the series on a grid of points; Δ comes from one prefix table.
pub fn voronoi_grid(points: &[f64], n_terms: u64, d_table: &[u64], poly: &MainTermPoly) -> Result<Vec<VoronoiEval>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for &x in points {
        check_args(x, n_terms, d_table)?;
    }
    let lo_n = lo.floor() as u64;
    let table = PrefixTable::build(lo_n, hi.floor() as u64 + 1, FunctionKind::D, divisor_summatory(lo_n - 1))?;
    let coeffs = &d_table[..n_terms as usize];
    Ok(points
        .iter()
        .map(|&x| {
            let approx = voronoi_sum(x, coeffs);
            let exact = delta_from_sum(x, table.get(x.floor() as u64) as u128, poly).delta;
            VoronoiEval { x, n_terms, approx, exact, abs_err: (approx - exact).abs() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::main_terms::{residue_poly, LaurentCoeffs};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2() -> MainTermPoly {
        residue_poly(2, &LaurentCoeffs::embedded()).unwrap()
    }

    #[test]
    fn term_magnitude_is_exact_envelope() {
        let x: f64 = 12_345.5;
        for (n, d) in [(1u64, 1u64), (6, 4), (12, 6), (997, 2)] {
            let envelope = x.powf(0.25) / (PI * SQRT_2) * d as f64 * (n as f64).powf(-0.75);
            let t = voronoi_term(x, n, d);
            assert!(t.abs() <= envelope * (1.0 + 1e-15));
            // same term with the phase computed naively
            let naive = envelope * (4.0 * PI * (n as f64 * x).sqrt() - PI / 4.0).cos();
            assert!((t - naive).abs() < 1e-9 * envelope);
        }
    }

    #[test]
    fn error_within_empirical_band() {
        let d = divisor_table(10_000).unwrap();
        let x: f64 = 1e5 + 0.5;
        let e = delta_voronoi(x, 10_000, &d, &p2()).unwrap();
        assert!(e.abs_err < 2.0 * x.powf(0.25), "{e:?}");
        assert_eq!(e.abs_err, (e.approx - e.exact).abs());
    }

    #[test]
    fn random_points_within_band() {
        let d = divisor_table(10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<f64> = (0..100).map(|_| rng.gen_range(100_000u64..200_000) as f64 + 0.5).collect();
        let evals = voronoi_grid(&pts, 10_000, &d, &p2()).unwrap();
        let worst = evals.iter().map(|e| e.abs_err / e.x.powf(0.25)).fold(0.0, f64::max);
        assert!(worst < 2.0, "worst normalized error {worst}");
    }

    #[test]
    fn doubling_n_does_not_grow_max_error() {
        let d = divisor_table(8000).unwrap();
        let grid = half_integer_grid(1e5, 2e5, 100);
        let max_err = |n| {
            voronoi_grid(&grid, n, &d, &p2())
                .unwrap()
                .iter()
                .map(|e| e.abs_err)
                .fold(0.0, f64::max)
        };
        let e1 = max_err(4000);
        let e2 = max_err(8000);
        assert!(e2 <= 1.1 * e1, "{e1} -> {e2}");
    }

    #[test]
    fn oscillatory_mean_is_small() {
        let d = divisor_table(1000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0: f64 = 1e5;
        let mean = (0..1000)
            .map(|_| voronoi_sum(rng.gen_range(x0..2.0 * x0), &d))
            .sum::<f64>()
            / 1000.0;
        assert!(mean.abs() < x0.powf(0.25) / 10.0, "mean {mean}");
    }

    #[test]
    fn integer_point_uses_inclusive_sum() {
        let d = divisor_table(10).unwrap();
        let e = delta_voronoi(100.0, 10, &d, &p2()).unwrap();
        let incl = delta_from_sum(100.0, divisor_summatory(100), &p2()).delta;
        assert_eq!(e.exact, incl);
    }

    #[test]
    fn rejects_long_truncation() {
        let d = divisor_table(200).unwrap();
        assert!(delta_voronoi(100.5, 200, &d, &p2()).is_err());
        assert!(delta_voronoi(100.5, 1, &d, &p2()).is_err());
        assert!(delta_voronoi(1.5, 1, &d, &p2()).is_err());
    }

    #[test]
    fn grid_is_half_integers_in_range() {
        let g = half_integer_grid(1e5, 2e5, 100);
        assert_eq!(g.len(), 100);
        assert!(g.iter().all(|x| x.fract() == 0.5 && *x > 1e5 && *x < 2e5));
    }
}
