//! The norm inequality `||h||_p ||h||_q <= C_k^{1/p} ||h||_2^2` for `h = sum g_i`.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use super::span::c_k_constant;
use crate::error::{Error, Result};
use crate::momentpoly::{CmAlphaTable, MuVector};
use crate::moments::{abs_norm, convolve, IndependentSum};
use crate::scalar::pow2;

#[derive(Debug, Clone)]
pub struct VplCheck {
    pub k: u32,
    pub p: u32,
    pub c_k: Integer,
    /// `||h||_p ||h||_q`.
    pub lhs: Float,
    /// `C_k^{1/p} ||h||_2^2`.
    pub rhs: Float,
    pub holds: bool,
}

/// Evaluates both sides on the exact distribution of `h` with masses `mu`.
///
/// `holds` allows a relative rounding slack of `2^-(prec - 16)`, which only
/// matters in the equality case `k = 1`.
pub fn vpl_check(k: u32, mu: &MuVector<Rational>, prec: u32) -> Result<VplCheck> {
    if k == 0 || mu.k() != k {
        return Err(Error::invalid("k", format!("{k} does not match {} masses", mu.k())));
    }
    let p = 2 * k;
    let h = IndependentSum::unit_sum(mu.values())?;
    let dist = convolve(&h)?;
    let pf = Float::with_val(prec, p);
    let q = Float::with_val(prec, &pf / Float::with_val(prec, p - 1));
    let lhs = abs_norm(&dist, &pf)? * abs_norm(&dist, &q)?;
    let table = CmAlphaTable::new(k)?;
    let c_k = c_k_constant(k, &table)?;
    let second: Rational = mu.values().iter().sum();
    let root = Float::with_val(prec, &c_k).pow(Float::with_val(prec, 1) / &pf);
    let rhs = root * Float::with_val(prec, &second);
    let slack = Float::with_val(prec, 1u32) + pow2(prec, -(prec as i32 - 16));
    let holds = lhs <= Float::with_val(prec, &rhs * &slack);
    Ok(VplCheck { k, p, c_k, lhs, rhs, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::default_base_point;

    #[test]
    fn k2_values() {
        let mu = default_base_point(2).unwrap();
        let v = vpl_check(2, &mu, 256).unwrap();
        assert_eq!(v.c_k, 8);
        let third = Float::with_val(256, 3).recip();
        let a = Float::with_val(256, Float::with_val(256, 2).pow(Float::with_val(256, 7) * &third) + 10u32) / 18u32;
        let b = Float::with_val(256, 7) * &third;
        let closed = Float::with_val(256, b.pow(0.25f64)) * Float::with_val(256, a.pow(0.75f64));
        assert!(Float::with_val(256, &v.lhs - &closed).abs() < 1e-60f64);
        assert!((v.lhs.to_f64() - 1.080112).abs() < 1e-6);
        assert!((v.rhs.to_f64() - 1.6818).abs() < 1e-4);
        assert!(v.holds);
    }

    #[test]
    fn single_mass_is_the_equality_case() {
        let mu = MuVector::new(vec![Rational::from((2, 7))]).unwrap();
        let v = vpl_check(1, &mu, 256).unwrap();
        assert!(v.holds);
        let gap = Float::with_val(256, &v.lhs - &v.rhs).abs();
        assert!(gap < Float::with_val(256, 1e-60));
    }
}
