use divisor_core::shifted_conv::{fit_shifted, shifted_sum, RangeMode, ShiftedFit};

/// d₃(1..=n) by Dirichlet convolution of d with 1, d itself by divisor loops.
fn d3_table(n: usize) -> Vec<u64> {
    let mut d = vec![0u64; n + 1];
    for a in 1..=n {
        for m in (a..=n).step_by(a) {
            d[m] += 1;
        }
    }
    let mut d3 = vec![0u64; n + 1];
    for a in 1..=n {
        for (j, m) in (a..=n).step_by(a).enumerate() {
            d3[m] += d[j + 1];
        }
    }
    d3
}

#[test]
fn ternary_dyadic_shift_one_matches_brute_force() {
    let n = 100_000u64;
    let d3 = d3_table(2 * n as usize + 1);
    let brute: u128 = (n + 1..=2 * n).map(|m| d3[m as usize] as u128 * d3[m as usize + 1] as u128).sum();
    assert_eq!(shifted_sum(3, n, 1, RangeMode::Dyadic).unwrap(), brute);
}

#[test]
fn leading_coefficient_stable_across_nested_windows() {
    let cps: Vec<u64> = (0..=5).map(|j| 100_000u64 << j).collect();
    let all = fit_shifted(2, 1, &cps, RangeMode::UptoN).unwrap();
    let last = fit_shifted(2, 1, &cps[1..], RangeMode::UptoN).unwrap();
    let (c_all, c_last) = (all.coeffs[2], last.coeffs[2]);
    assert!((c_last - c_all).abs() / c_all < 0.05, "{c_last} vs {c_all}");
}

fn group_envelopes(fit: &ShiftedFit, groups: usize) -> Vec<f64> {
    let size = fit.records.len() / groups;
    fit.records
        .chunks(size)
        .take(groups)
        .map(|g| g.iter().map(|r| (r.residual / r.n as f64).abs()).fold(0.0, f64::max))
        .collect()
}

#[test]
fn ternary_residual_shrinks_relative_to_n() {
    let cps: Vec<u64> = (0..=20).map(|j| (10_000.0 * 2f64.powf(j as f64 / 2.0)).round() as u64).collect();
    let fit = fit_shifted(3, 1, &cps, RangeMode::UptoN).unwrap();
    assert_eq!(fit.coeffs.len(), 5);
    let env = group_envelopes(&fit, 3);
    assert!(env.windows(2).all(|w| w[1] < w[0]), "{env:?}");
}
