//! Floating-point support shared by the analytic modules: compensated
//! summation, quadrature, double-double phase arithmetic and small
//! least-squares fits.

mod ddouble;
mod kahan;
mod lsq;
mod quad;

pub use ddouble::{frac_turns_of_sqrt, two_prod, two_sum, DoubleDouble};
pub use kahan::NeumaierSum;
pub use lsq::{fit_polynomial, PolyFit};
pub use quad::{adaptive_gk15, gauss_legendre4, QuadResult};

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((ols_slope(&xs, &ys) - 3.0).abs() < 1e-14);
    }
}
