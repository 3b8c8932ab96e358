//! Number domains shared by the whole crate.
//!
//! Combinatorial quantities are exact [`Rational`]s. Anything involving
//! logarithms, fractional powers or solver output lives in [`PrecReal`], an
//! MPFR float that carries its own precision. Both implement [`Scalar`], so
//! the moment and polynomial engines are written once.

use std::cmp::Ordering;
use std::fmt::Debug;

use rug::float::Round;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// A real number at a recorded binary precision.
pub type PrecReal = Float;

/// Default working precision in bits.
pub const DEFAULT_PRECISION: u32 = 256;
/// Smallest precision accepted anywhere a [`Precision`] is built.
pub const MIN_PRECISION: u32 = 128;

/// Binary precision in bits, at least [`MIN_PRECISION`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(u32);

impl Precision {
    pub fn new(bits: u32) -> Result<Self> {
        if bits < MIN_PRECISION {
            return Err(Error::invalid(
                "precision",
                format!("{bits} bits is below the minimum of {MIN_PRECISION}"),
            ));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn doubled(self) -> Self {
        Precision(self.0 * 2)
    }

    /// `2^-(bits/2)`, the residual tolerance used throughout the solver.
    pub fn half_tolerance(self) -> Float {
        pow2(self.0, -((self.0 / 2) as i32))
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(DEFAULT_PRECISION)
    }
}

/// `2^e` at the given precision.
pub fn pow2(prec: u32, e: i32) -> Float {
    Float::with_val(prec, 1) << e
}

/// Field operations needed by the moment and polynomial engines.
///
/// Constructors take a `like` value so that floats inherit the precision of
/// the operands they are combined with.
pub trait Scalar: Clone + Debug {
    fn int_like(&self, v: i64) -> Self;
    fn integer_like(&self, v: &Integer) -> Self;
    fn rational_like(&self, v: &Rational) -> Self;
    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn div_ref(&self, other: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn abs_ref(&self) -> Self;
    fn pow_u(&self, e: u32) -> Self;
    fn cmp_value(&self, other: &Self) -> Ordering;
    fn sign(&self) -> Ordering;
    fn to_prec_real(&self, prec: u32) -> Float;
    /// Serialized form: `"num/den"` for rationals, a decimal string for floats.
    fn to_text(&self) -> String;
    /// Working precision for floats, `None` for exact domains.
    fn precision_bits(&self) -> Option<u32>;
    /// The same value carried at `bits` of precision; exact domains return a clone.
    fn at_precision(&self, bits: u32) -> Self;

    fn zero_like(&self) -> Self {
        self.int_like(0)
    }
    fn one_like(&self) -> Self {
        self.int_like(1)
    }
    fn is_zero(&self) -> bool {
        self.sign() == Ordering::Equal
    }
}

impl Scalar for Rational {
    fn int_like(&self, v: i64) -> Self {
        Rational::from(v)
    }
    fn integer_like(&self, v: &Integer) -> Self {
        Rational::from(v)
    }
    fn rational_like(&self, v: &Rational) -> Self {
        v.clone()
    }
    fn add_ref(&self, other: &Self) -> Self {
        Rational::from(self + other)
    }
    fn sub_ref(&self, other: &Self) -> Self {
        Rational::from(self - other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        Rational::from(self * other)
    }
    fn div_ref(&self, other: &Self) -> Self {
        Rational::from(self / other)
    }
    fn neg_ref(&self) -> Self {
        Rational::from(-self)
    }
    fn abs_ref(&self) -> Self {
        Rational::from(self.abs_ref())
    }
    fn pow_u(&self, e: u32) -> Self {
        Rational::from(Pow::pow(self, e))
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn sign(&self) -> Ordering {
        self.cmp0()
    }
    fn to_prec_real(&self, prec: u32) -> Float {
        Float::with_val(prec, self)
    }
    fn to_text(&self) -> String {
        self.to_string()
    }
    fn precision_bits(&self) -> Option<u32> {
        None
    }
    fn at_precision(&self, _bits: u32) -> Self {
        self.clone()
    }
}

impl Scalar for Float {
    fn int_like(&self, v: i64) -> Self {
        Float::with_val(self.prec(), v)
    }
    fn integer_like(&self, v: &Integer) -> Self {
        Float::with_val(self.prec(), v)
    }
    fn rational_like(&self, v: &Rational) -> Self {
        Float::with_val(self.prec(), v)
    }
    fn add_ref(&self, other: &Self) -> Self {
        Float::with_val(self.prec().max(other.prec()), self + other)
    }
    fn sub_ref(&self, other: &Self) -> Self {
        Float::with_val(self.prec().max(other.prec()), self - other)
    }
    fn mul_ref(&self, other: &Self) -> Self {
        Float::with_val(self.prec().max(other.prec()), self * other)
    }
    fn div_ref(&self, other: &Self) -> Self {
        Float::with_val(self.prec().max(other.prec()), self / other)
    }
    fn neg_ref(&self) -> Self {
        Float::with_val(self.prec(), -self)
    }
    fn abs_ref(&self) -> Self {
        Float::with_val(self.prec(), self.abs_ref())
    }
    fn pow_u(&self, e: u32) -> Self {
        Float::with_val(self.prec(), Pow::pow(self, e))
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        self.total_cmp(other)
    }
    fn sign(&self) -> Ordering {
        self.cmp0().unwrap_or(Ordering::Equal)
    }
    fn to_prec_real(&self, prec: u32) -> Float {
        Float::with_val(prec, self)
    }
    fn to_text(&self) -> String {
        real_to_string(self)
    }
    fn precision_bits(&self) -> Option<u32> {
        Some(self.prec())
    }
    fn at_precision(&self, bits: u32) -> Self {
        Float::with_val(bits, self)
    }
}

/// Parses `"num/den"`, an integer, or a decimal literal into an exact rational.
///
/// Decimals are read exactly (`"0.1"` is `1/10`), not through binary floats.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.contains('/') || !s.contains(['.', 'e', 'E']) {
        return s.parse::<Rational>().map_err(|_| Error::Parse(s.to_string()));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().map_err(|_| Error::Parse(s.to_string()))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    let num: Integer = digits.parse().map_err(|_| Error::Parse(s.to_string()))?;
    let shift = exp - frac_part.len() as i64;
    let ten = Integer::from(10);
    let mag = ten.pow(shift.unsigned_abs() as u32);
    Ok(if shift >= 0 {
        Rational::from(num * mag)
    } else {
        Rational::from((num, mag))
    })
}

/// Decimal string that parses back to the identical float at the same precision.
pub fn real_to_string(x: &Float) -> String {
    x.to_string_radix(10, None)
}

pub fn parse_real(s: &str, prec: u32) -> Result<Float> {
    let parsed = Float::parse(s.trim()).map_err(|_| Error::Parse(s.to_string()))?;
    Ok(Float::with_val(prec, parsed))
}

/// Exact value of a finite float.
pub fn real_to_rational(x: &Float) -> Result<Rational> {
    x.to_rational()
        .ok_or_else(|| Error::Parse(format!("non-finite value {x}")))
}

/// Rounds an exact rational up to a float, so the result bounds it from above.
pub fn rational_round_up(x: &Rational, prec: u32) -> Float {
    Float::with_val_round(prec, x, Round::Up).0
}

/// Natural logarithm at the given precision.
pub fn ln(x: &Float) -> Float {
    Float::with_val(x.prec(), x.ln_ref())
}

/// `x^e` for positive `x` and real `e`.
pub fn powf(x: &Float, e: &Float) -> Float {
    let prec = x.prec().max(e.prec());
    Float::with_val(prec, Pow::pow(x, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.1").unwrap(), Rational::from((1, 10)));
        assert_eq!(parse_rational("-2.5e-3").unwrap(), Rational::from((-1, 400)));
        assert_eq!(parse_rational("3/6").unwrap(), Rational::from((1, 2)));
        assert_eq!(parse_rational("7").unwrap(), Rational::from(7));
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn precision_floor() {
        assert!(Precision::new(64).is_err());
        assert_eq!(Precision::new(128).unwrap().bits(), 128);
    }

    #[test]
    fn float_ops_keep_the_wider_precision() {
        let a = Float::with_val(128, 1);
        let b = Float::with_val(512, 3);
        assert_eq!(a.div_ref(&b).prec(), 512);
    }

    #[test]
    fn real_strings_round_trip() {
        let x = Float::with_val(256, 2).sqrt();
        let s = real_to_string(&x);
        assert_eq!(parse_real(&s, 256).unwrap(), x);
    }
}
