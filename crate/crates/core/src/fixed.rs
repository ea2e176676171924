//! Signed Q-format fixed-point arithmetic.
//!
//! A [`FixedPoint`] carries a raw two's-complement integer together with its
//! [`QFormat`] (total width `W`, fraction bits `F`); the represented value is
//! `raw / 2^F`. All arithmetic saturates at the format bounds and every
//! rounding step is round-to-nearest, ties to even.

use std::fmt;
use std::ops::{Add, Mul, Neg};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("total width {0} outside supported range 2..=53")]
    Width(u32),
    #[error("fraction bits {frac} must be below total width {total}")]
    Fraction { total: u32, frac: u32 },
}

/// Word layout of a fixed-point value.
///
/// Widths are capped at 53 bits so every representable value is exact in an
/// `f64`; products accumulate in `i128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u32,
    frac_bits: u32,
}

impl QFormat {
    /// 24-bit words with 12 fraction bits.
    pub const DEFAULT: QFormat = QFormat {
        total_bits: 24,
        frac_bits: 12,
    };

    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self, FormatError> {
        if !(2..=53).contains(&total_bits) {
            return Err(FormatError::Width(total_bits));
        }
        if frac_bits >= total_bits {
            return Err(FormatError::Fraction {
                total: total_bits,
                frac: frac_bits,
            });
        }
        Ok(QFormat { total_bits, frac_bits })
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn max_raw(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Raw representation of 1.0, or the largest raw value if 1.0 is out of range.
    pub fn one_raw(self) -> i64 {
        (1i64 << self.frac_bits).min(self.max_raw())
    }

    /// Weight of one least significant bit, `2^-F`.
    pub fn ulp(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.ulp()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.ulp()
    }

    pub fn saturate(self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    pub fn contains_raw(self, raw: i64) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }

    /// Whether `x` is exactly one of this format's representable values.
    pub fn represents(self, x: f64) -> bool {
        let scaled = x * (self.frac_bits as f64).exp2();
        scaled.is_finite()
            && scaled.fract() == 0.0
            && scaled >= self.min_raw() as f64
            && scaled <= self.max_raw() as f64
    }
}

impl Default for QFormat {
    fn default() -> Self {
        QFormat::DEFAULT
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.total_bits - self.frac_bits, self.frac_bits)
    }
}

/// Arithmetic right shift by `k` with round-to-nearest, ties to even.
pub fn round_shift(value: i128, k: u32) -> i128 {
    if k == 0 {
        return value;
    }
    if k >= 127 {
        return 0;
    }
    let floor = value >> k;
    let rem = value - (floor << k);
    let half = 1i128 << (k - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPoint {
    raw: i64,
    format: QFormat,
}

impl FixedPoint {
    /// Wraps a raw word, saturating it into the format's range.
    pub fn from_raw(raw: i64, format: QFormat) -> Self {
        FixedPoint {
            raw: format.saturate(raw as i128),
            format,
        }
    }

    pub fn zero(format: QFormat) -> Self {
        FixedPoint { raw: 0, format }
    }

    pub fn one(format: QFormat) -> Self {
        FixedPoint {
            raw: format.one_raw(),
            format,
        }
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn format(self) -> QFormat {
        self.format
    }

    pub fn is_saturated(self) -> bool {
        self.raw == self.format.max_raw() || self.raw == self.format.min_raw()
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 * self.format.ulp()
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Quantizes `x` to the nearest representable value (ties to even), saturating.
/// NaN maps to zero.
pub fn to_fixed(x: f64, format: QFormat) -> FixedPoint {
    if x.is_nan() {
        return FixedPoint::zero(format);
    }
    let scaled = (x * (format.frac_bits as f64).exp2()).round_ties_even();
    let raw = if scaled >= format.max_raw() as f64 {
        format.max_raw()
    } else if scaled <= format.min_raw() as f64 {
        format.min_raw()
    } else {
        scaled as i64
    };
    FixedPoint { raw, format }
}

pub fn from_fixed(x: FixedPoint) -> f64 {
    x.to_f64()
}

fn check_formats(a: FixedPoint, b: FixedPoint) -> QFormat {
    assert_eq!(a.format, b.format, "fixed-point operands in different formats");
    a.format
}

pub fn fx_add(a: FixedPoint, b: FixedPoint) -> FixedPoint {
    let format = check_formats(a, b);
    FixedPoint {
        raw: format.saturate(a.raw as i128 + b.raw as i128),
        format,
    }
}

pub fn fx_sub(a: FixedPoint, b: FixedPoint) -> FixedPoint {
    let format = check_formats(a, b);
    FixedPoint {
        raw: format.saturate(a.raw as i128 - b.raw as i128),
        format,
    }
}

pub fn fx_mul(a: FixedPoint, b: FixedPoint) -> FixedPoint {
    let format = check_formats(a, b);
    let product = a.raw as i128 * b.raw as i128;
    FixedPoint {
        raw: format.saturate(round_shift(product, format.frac_bits)),
        format,
    }
}

/// Multiplies by `2^-k`.
pub fn fx_shr(a: FixedPoint, k: u32) -> FixedPoint {
    FixedPoint {
        raw: a.format.saturate(round_shift(a.raw as i128, k)),
        format: a.format,
    }
}

impl Add for FixedPoint {
    type Output = FixedPoint;

    fn add(self, rhs: FixedPoint) -> FixedPoint {
        fx_add(self, rhs)
    }
}

impl Mul for FixedPoint {
    type Output = FixedPoint;

    fn mul(self, rhs: FixedPoint) -> FixedPoint {
        fx_mul(self, rhs)
    }
}

impl Neg for FixedPoint {
    type Output = FixedPoint;

    fn neg(self) -> FixedPoint {
        FixedPoint {
            raw: self.format.saturate(-(self.raw as i128)),
            format: self.format,
        }
    }
}

/// Dot product accumulated at double width, rounded once back to `format`.
///
/// `bias` is added at full precision before the final rounding.
pub fn fx_dot(weights: &[i64], inputs: &[i64], bias: i64, format: QFormat) -> FixedPoint {
    debug_assert_eq!(weights.len(), inputs.len());
    let acc: i128 = weights
        .iter()
        .zip(inputs)
        .map(|(&w, &x)| w as i128 * x as i128)
        .sum::<i128>()
        + ((bias as i128) << format.frac_bits);
    FixedPoint {
        raw: format.saturate(round_shift(acc, format.frac_bits)),
        format,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Q: QFormat = QFormat::DEFAULT;

    #[test]
    fn one_is_4096() {
        assert_eq!(to_fixed(1.0, Q).raw(), 4096);
        assert_eq!(to_fixed(-0.25, Q).raw(), -1024);
    }

    #[test]
    fn saturates_at_format_bound() {
        let x = to_fixed(3000.0, Q);
        assert_eq!(x.raw(), (1 << 23) - 1);
        assert_eq!(x.to_f64(), ((1i64 << 23) - 1) as f64 / 4096.0);
        assert_eq!(to_fixed(-1e9, Q).raw(), -(1 << 23));
        assert_eq!(to_fixed(f64::INFINITY, Q).raw(), (1 << 23) - 1);
        assert_eq!(to_fixed(f64::NAN, Q).raw(), 0);
    }

    #[test]
    fn ties_round_to_even() {
        // 0.5 ulp and 1.5 ulp
        assert_eq!(to_fixed(0.5 / 4096.0, Q).raw(), 0);
        assert_eq!(to_fixed(1.5 / 4096.0, Q).raw(), 2);
        assert_eq!(to_fixed(-1.5 / 4096.0, Q).raw(), -2);
        assert_eq!(round_shift(3, 1), 2);
        assert_eq!(round_shift(5, 1), 2);
        assert_eq!(round_shift(-3, 1), -2);
        assert_eq!(round_shift(7, 2), 2);
    }

    #[test]
    fn mul_and_shift_basics() {
        let half = to_fixed(0.5, Q);
        assert_eq!(fx_mul(half, half).to_f64(), 0.25);
        assert_eq!(fx_shr(to_fixed(1.0, Q), 1).to_f64(), 0.5);
        assert_eq!((half + half).to_f64(), 1.0);
        assert_eq!((-half).to_f64(), -0.5);
    }

    #[test]
    fn negating_min_saturates() {
        let min = FixedPoint::from_raw(Q.min_raw(), Q);
        assert_eq!((-min).raw(), Q.max_raw());
    }

    #[test]
    fn rejects_bad_formats() {
        assert!(QFormat::new(1, 0).is_err());
        assert!(QFormat::new(64, 12).is_err());
        assert!(QFormat::new(12, 12).is_err());
        assert_eq!(QFormat::new(24, 12).unwrap(), Q);
    }

    #[test]
    fn dot_accumulates_before_rounding() {
        // Each product is 1/8192 (half an ulp); the sum of four is 2 ulp.
        let w = vec![1i64; 4];
        let x = vec![2048i64; 4];
        assert_eq!(fx_dot(&w, &x, 0, Q).raw(), 2);
    }

    fn in_range() -> impl Strategy<Value = f64> {
        -2047.0f64..2047.0
    }

    proptest! {
        #[test]
        fn quantization_error_is_half_ulp(x in in_range()) {
            let err = (to_fixed(x, Q).to_f64() - x).abs();
            prop_assert!(err <= Q.ulp() / 2.0);
        }

        #[test]
        fn mul_error_within_ulp(a in -40.0f64..40.0, b in -40.0f64..40.0) {
            let (fa, fb) = (to_fixed(a, Q), to_fixed(b, Q));
            let exact = fa.to_f64() * fb.to_f64();
            prop_assert!((fx_mul(fa, fb).to_f64() - exact).abs() <= Q.ulp());
        }

        #[test]
        fn add_mul_commute(a in in_range(), b in in_range()) {
            let (fa, fb) = (to_fixed(a, Q), to_fixed(b, Q));
            prop_assert_eq!(fx_add(fa, fb), fx_add(fb, fa));
            prop_assert_eq!(fx_mul(fa, fb), fx_mul(fb, fa));
        }

        #[test]
        fn add_associates_without_saturation(a in -500.0f64..500.0, b in -500.0f64..500.0, c in -500.0f64..500.0) {
            let (fa, fb, fc) = (to_fixed(a, Q), to_fixed(b, Q), to_fixed(c, Q));
            prop_assert_eq!(fx_add(fx_add(fa, fb), fc), fx_add(fa, fx_add(fb, fc)));
        }

        #[test]
        fn saturated_values_stay_in_range(a in any::<i64>(), b in any::<i64>(), k in 0u32..30) {
            let (fa, fb) = (FixedPoint::from_raw(a, Q), FixedPoint::from_raw(b, Q));
            for r in [fx_add(fa, fb), fx_sub(fa, fb), fx_mul(fa, fb), fx_shr(fa, k), -fa] {
                prop_assert!(Q.contains_raw(r.raw()));
            }
        }
    }
}
