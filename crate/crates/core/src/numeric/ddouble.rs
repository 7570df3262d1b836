/// Unevaluated sum `hi + lo` with |lo| ≤ ulp(hi)/2 (about 106 bits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    pub fn product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(0.0);
        }
        let s = self.hi.sqrt();
        // one Newton correction on the residual, evaluated exactly via fma
        let (sq_hi, sq_lo) = two_prod(s, s);
        let resid = ((self.hi - sq_hi) - sq_lo) + self.lo;
        let corr = resid / (2.0 * s);
        let (hi, lo) = two_sum(s, corr);
        Self { hi, lo }
    }

    pub fn scale(self, k: f64) -> Self {
        let (p, e) = two_prod(self.hi, k);
        let (hi, lo) = two_sum(p, e + self.lo * k);
        Self { hi, lo }
    }

    /// Fractional part in [0, 1), computed without collapsing to f64 first.
    pub fn fract(self) -> f64 {
        let f = self.hi - self.hi.floor();
        let v = f + self.lo;
        v - v.floor()
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `frac(scale·√(a·b) + shift)` with the product and root in double-double,
/// for phases `2π·frac(..)` whose integer part would swamp an f64.
pub fn frac_turns_of_sqrt(a: f64, b: f64, scale: f64, shift: f64) -> f64 {
    let root = DoubleDouble::product(a, b).sqrt().scale(scale);
    let f = root.fract() + shift;
    f - f.floor()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_perfect_square_is_exact() {
        let r = DoubleDouble::product(12345.0, 12345.0).sqrt();
        assert_eq!(r.hi, 12345.0);
        assert_eq!(r.lo, 0.0);
    }

    #[test]
    fn phase_beats_plain_f64_at_large_argument() {
        // reference from a 50-digit evaluation of frac(2·√(n·x))
        let (n, x) = (98_765_431.0, 999_999_999_999.5);
        let reference = 0.432_022_399_838_079_6;
        let f = frac_turns_of_sqrt(n, x, 2.0, 0.0);
        assert!((f - reference).abs() < 1e-9, "{f}");
        let plain = (2.0 * (n * x).sqrt()).fract();
        assert!((plain - reference).abs() > 1e-7);
    }

    #[test]
    fn fract_handles_negative_low_part() {
        let v = DoubleDouble { hi: 3.0, lo: -0.25 };
        assert_eq!(v.fract(), 0.75);
    }
}
