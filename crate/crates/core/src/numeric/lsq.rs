use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number (of the column-equilibrated design matrix) above which
/// a fit is rejected.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// coeffs[j] multiplies t^j.
    pub coeffs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub condition: f64,
}

impl PolyFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Ordinary least squares of `ys` on 1, t, …, t^degree.
pub fn fit_polynomial(ts: &[f64], ys: &[f64], degree: usize) -> Result<PolyFit> {
    let rows = ts.len();
    let cols = degree + 1;
    if rows != ys.len() {
        return Err(Error::Precondition("abscissa/ordinate length mismatch".into()));
    }
    if rows < cols {
        return Err(Error::Conditioning(format!(
            "{rows} points cannot determine {cols} coefficients"
        )));
    }
    // centre and scale t so the Vandermonde columns are well separated
    let centre = ts.iter().sum::<f64>() / rows as f64;
    let spread = ts.iter().map(|t| (t - centre).abs()).fold(0.0, f64::max);
    if spread == 0.0 {
        return Err(Error::Conditioning("all abscissae coincide".into()));
    }
    let u: Vec<f64> = ts.iter().map(|t| (t - centre) / spread).collect();
    let mut a = DMatrix::<f64>::from_fn(rows, cols, |i, j| u[i].powi(j as i32));
    let mut col_scale = vec![1.0; cols];
    for j in 0..cols {
        let norm = a.column(j).norm();
        if norm == 0.0 {
            return Err(Error::Conditioning(format!("column {j} vanishes")));
        }
        col_scale[j] = norm;
        a.column_mut(j).scale_mut(1.0 / norm);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning(format!("condition number {condition:.3e}")));
    }
    let b = DVector::from_column_slice(ys);
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Conditioning(e.to_string()))?;
    let scaled: Vec<f64> = (0..cols).map(|j| sol[j] / col_scale[j]).collect();

    // expand Σ b_j ((t − centre)/spread)^j into powers of t
    let mut coeffs = vec![0.0; cols];
    for (j, bj) in scaled.iter().enumerate() {
        let factor = bj / spread.powi(j as i32);
        // (t − c)^j = Σ_i C(j,i) t^i (−c)^{j−i}
        let mut binom = 1.0;
        for i in 0..=j {
            coeffs[i] += factor * binom * (-centre).powi((j - i) as i32);
            binom = binom * (j - i) as f64 / (i + 1) as f64;
        }
    }
    let fitted_scaled = |ui: f64| scaled.iter().rev().fold(0.0, |acc, c| acc * ui + c);
    let residuals = u.iter().zip(ys).map(|(ui, y)| y - fitted_scaled(*ui)).collect();
    Ok(PolyFit { coeffs, residuals, condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_cubic() {
        let ts: Vec<f64> = (0..8).map(|i| 10.0 + 0.7 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 0.5 * t * t * t - 2.0 * t + 1.25).collect();
        let fit = fit_polynomial(&ts, &ys, 3).unwrap();
        let want = [1.25, -2.0, 0.0, 0.5];
        for (c, w) in fit.coeffs.iter().zip(want) {
            assert!((c - w).abs() < 1e-6, "{:?}", fit.coeffs);
        }
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn underdetermined_is_a_conditioning_error() {
        let err = fit_polynomial(&[1.0, 2.0], &[1.0, 2.0], 2).unwrap_err();
        assert!(matches!(err, Error::Conditioning(_)));
    }

    #[test]
    fn coincident_abscissae_rejected() {
        let err = fit_polynomial(&[3.0; 5], &[1.0; 5], 1).unwrap_err();
        assert!(matches!(err, Error::Conditioning(_)));
    }
}
