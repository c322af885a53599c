//! Arbitrary-precision complex scalars backed by MPFR.
//!
//! Every value carries its own working precision in bits. Binary operations
//! produce results at the minimum precision of the operands, so precision
//! never silently inflates through a computation.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Round;
use rug::ops::Pow;
use rug::{Complex, Float};

/// Minimum admissible working precision in bits.
pub const MIN_PREC: u32 = 64;

/// A complex number at a fixed binary precision.
///
/// Wraps `rug::Complex` and enforces two rules on top of it: precision is at
/// least [`MIN_PREC`], and arithmetic results carry the minimum precision of
/// the operands.
#[derive(Clone, PartialEq)]
pub struct BigComplex {
    inner: Complex,
}

impl BigComplex {
    /// Build from `f64` parts at the given precision. Panics if `prec < 64`.
    pub fn new(prec: u32, re: f64, im: f64) -> Self {
        assert!(prec >= MIN_PREC, "precision {prec} below minimum {MIN_PREC}");
        Self {
            inner: Complex::with_val(prec, (re, im)),
        }
    }

    pub fn zero(prec: u32) -> Self {
        Self::new(prec, 0.0, 0.0)
    }

    pub fn one(prec: u32) -> Self {
        Self::new(prec, 1.0, 0.0)
    }

    pub fn from_f64(prec: u32, re: f64) -> Self {
        Self::new(prec, re, 0.0)
    }

    /// Exact small-integer ratio `p/q` at the given precision.
    pub fn from_ratio(prec: u32, p: i64, q: i64) -> Self {
        assert!(prec >= MIN_PREC);
        assert!(q != 0, "zero denominator");
        let v = Float::with_val(prec, p) / Float::with_val(prec, q);
        Self {
            inner: Complex::with_val(prec, v),
        }
    }

    pub fn from_float(re: Float) -> Self {
        assert!(re.prec() >= MIN_PREC);
        let prec = re.prec();
        Self {
            inner: Complex::with_val(prec, re),
        }
    }

    pub fn from_parts(re: Float, im: Float) -> Self {
        let prec = re.prec().min(im.prec());
        assert!(prec >= MIN_PREC);
        Self {
            inner: Complex::with_val(prec, (re, im)),
        }
    }

    pub fn prec(&self) -> u32 {
        self.inner.prec().0
    }

    pub fn re(&self) -> &Float {
        self.inner.real()
    }

    pub fn im(&self) -> &Float {
        self.inner.imag()
    }

    pub fn re_f64(&self) -> f64 {
        self.inner.real().to_f64()
    }

    pub fn im_f64(&self) -> f64 {
        self.inner.imag().to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.inner.real().is_zero() && self.inner.imag().is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.real().is_finite() && self.inner.imag().is_finite()
    }

    /// |self| as a real at this value's precision.
    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.inner.abs_ref())
    }

    /// |self| as f64 (saturating on exponent overflow of f64).
    pub fn abs_f64(&self) -> f64 {
        self.abs().to_f64()
    }

    /// Re-round to a new precision.
    pub fn with_prec(&self, prec: u32) -> Self {
        assert!(prec >= MIN_PREC);
        Self {
            inner: Complex::with_val(prec, &self.inner),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            inner: Complex::with_val(self.prec(), self.inner.conj_ref()),
        }
    }

    pub fn recip(&self) -> Self {
        Self {
            inner: Complex::with_val(self.prec(), self.inner.recip_ref()),
        }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        Self {
            inner: Complex::with_val(self.prec(), self.inner.sqrt_ref()),
        }
    }

    /// Principal branch of the logarithm.
    pub fn ln(&self) -> Self {
        Self {
            inner: Complex::with_val(self.prec(), self.inner.ln_ref()),
        }
    }

    pub fn exp(&self) -> Self {
        Self {
            inner: Complex::with_val(self.prec(), self.inner.exp_ref()),
        }
    }

    /// Principal power: `exp(e * ln(self))`.
    pub fn pow(&self, e: &BigComplex) -> Self {
        let prec = self.prec().min(e.prec());
        Self {
            inner: Complex::with_val(prec, (&self.inner).pow(&e.inner)),
        }
    }

    pub fn scale_float(&self, f: &Float) -> Self {
        let prec = self.prec().min(f.prec());
        Self {
            inner: Complex::with_val(prec, &self.inner * f),
        }
    }

    /// Decimal strings for (re, im) with enough digits to round-trip the
    /// binary representation exactly.
    pub fn to_decimal_parts(&self) -> (String, String) {
        (
            float_to_decimal(self.inner.real()),
            float_to_decimal(self.inner.imag()),
        )
    }

    /// Parse decimal (or `p/q` rational) strings at the given precision.
    pub fn from_decimal_parts(prec: u32, re: &str, im: &str) -> Result<Self, String> {
        let re = parse_real(prec, re)?;
        let im = parse_real(prec, im)?;
        Ok(Self::from_parts(re, im))
    }
}

/// Decimal string with round-trip-exact digit count for this float's precision.
pub fn float_to_decimal(f: &Float) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    // ceil(P * log10(2)) + 2 digits always round-trips under correctly
    // rounded conversions.
    let digits = (f.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2;
    let (sign, digs, exp) = f.to_sign_string_exp_round(10, Some(digits), Round::Nearest);
    let s = if sign { "-" } else { "" };
    let exp = exp.unwrap_or(0);
    format!("{s}0.{digs}e{exp}")
}

/// Parse a real parameter: a decimal string, or an exact rational "p/q".
pub fn parse_real(prec: u32, s: &str) -> Result<Float, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = Float::parse(p.trim()).map_err(|e| format!("bad numerator {p:?}: {e}"))?;
        let q = Float::parse(q.trim()).map_err(|e| format!("bad denominator {q:?}: {e}"))?;
        let q = Float::with_val(prec, q);
        if q.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Float::with_val(prec, p) / q)
    } else {
        let v = Float::parse(s).map_err(|e| format!("bad decimal {s:?}: {e}"))?;
        Ok(Float::with_val(prec, v))
    }
}

impl fmt::Debug for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6e} {:+.6e}i)@{}", self.re_f64(), self.im_f64(), self.prec())
    }
}

impl fmt::Display for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = self.to_decimal_parts();
        write!(f, "{re} {im}")
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &BigComplex {
            type Output = BigComplex;
            fn $method(self, rhs: &BigComplex) -> BigComplex {
                let prec = self.prec().min(rhs.prec());
                BigComplex {
                    inner: Complex::with_val(prec, &self.inner $op &rhs.inner),
                }
            }
        }
        impl $trait for BigComplex {
            type Output = BigComplex;
            fn $method(self, rhs: BigComplex) -> BigComplex {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for &BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        BigComplex {
            inner: Complex::with_val(self.prec(), (&self.inner).neg()),
        }
    }
}

impl Neg for BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        (&self).neg()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_precision_propagates() {
        let a = BigComplex::new(256, 1.5, 0.0);
        let b = BigComplex::new(128, 2.0, -1.0);
        assert_eq!((&a * &b).prec(), 128);
        assert_eq!((&a + &b).prec(), 128);
    }

    #[test]
    #[should_panic]
    fn rejects_low_precision() {
        BigComplex::new(32, 1.0, 0.0);
    }

    #[test]
    fn decimal_round_trip_is_exact() {
        let x = BigComplex::from_ratio(512, 1, 3);
        let (re, im) = x.to_decimal_parts();
        let y = BigComplex::from_decimal_parts(512, &re, &im).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn rational_parse_is_exact() {
        let third = parse_real(512, "1/3").unwrap();
        let three = Float::with_val(512, 3);
        let one = third * three;
        assert_eq!(one, Float::with_val(512, 1));
    }

    #[test]
    fn principal_sqrt() {
        let x = BigComplex::from_f64(128, 4.0);
        assert!((x.sqrt().re_f64() - 2.0).abs() < 1e-30);
        let m = BigComplex::from_f64(128, -1.0);
        let s = m.sqrt();
        assert!(s.im_f64() > 0.0, "principal sqrt of -1 is +i");
    }
}
