use divisor_core::main_terms::{
    mean_square_delta, residue_poly, summatory_dk, LaurentCoeffs, MeanSquareMode, EULER_GAMMA, STIELTJES_1,
};
use divisor_core::numeric::ols_slope;

#[test]
fn cubic_constant_term_by_numeric_fit() {
    // c₀ recovered from Σ d₃ alone, then compared with the residue expansion
    let g = EULER_GAMMA;
    let estimates: Vec<f64> = [1_000_000u64, 2_000_000, 4_000_000, 8_000_000]
        .iter()
        .map(|&x| {
            let l = (x as f64).ln();
            summatory_dk(x, 3).unwrap() as f64 / x as f64 - (0.5 * l * l + (3.0 * g - 1.0) * l)
        })
        .collect();
    let fitted = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let spread = estimates.iter().fold(0.0f64, |m, e| m.max((e - fitted).abs()));
    assert!(spread < 1e-3, "{estimates:?}");

    // hand expansion of ζ³(s)x^{s−1}/s at s = 1
    let by_hand = 3.0 * g * g - 3.0 * g - 3.0 * STIELTJES_1 + 1.0;
    assert!((by_hand - 0.48635).abs() < 1e-4);
    // each estimate carries Δ₃(x)/x, a few parts in 10³ at x ≈ 10⁶
    assert!((fitted - by_hand).abs() < 5e-3, "fitted {fitted} vs {by_hand}");

    let p = residue_poly(3, &LaurentCoeffs::embedded()).unwrap();
    assert!((p.coeffs[0] - by_hand).abs() < 1e-14);
    assert!((p.coeffs[1] - (3.0 * g - 1.0)).abs() < 1e-15);
    assert_eq!(p.coeffs[2], 0.5);
}

#[test]
fn mean_square_growth_exponent() {
    let p = residue_poly(2, &LaurentCoeffs::embedded()).unwrap();
    let xs = [1e4, 1e5, 1e6];
    let logs: Vec<f64> = xs
        .iter()
        .map(|&x| mean_square_delta(2, x, MeanSquareMode::Exact, &p).unwrap().value.ln())
        .collect();
    let slope = ols_slope(&xs.map(f64::ln), &logs);
    assert!((slope - 1.5).abs() < 0.1, "slope {slope}");
}
