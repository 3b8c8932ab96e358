//! Moment polynomials of `h = g_1 + ... + g_k` and `f = h + j g'`.
//!
//! With unit-scale summands of masses `mu_1..mu_k`,
//!
//! ```text
//! E h^{2m}  = H_m(mu)  = sum_{alpha=1}^{m} C_{m,alpha} P_alpha(mu)
//! E f^{2m}  = F_m(mu, nu) = H_m(mu) + nu * sum_{l=1}^{m} C(2m, 2l) j^{2l} H_{m-l}(mu)
//! ```
//!
//! where `P_alpha` is the elementary symmetric polynomial of degree `alpha` and
//! `C_{m,alpha}` sums `(2m)! / prod (2m_i)!` over compositions of `m` into
//! `alpha` positive parts. Everything here is evaluated, never expanded
//! symbolically; derivatives are exact.

use std::cmp::Ordering;

use rug::Integer;

use crate::error::{Error, Result};
use crate::linalg::{det_is_nonzero, determinant};
use crate::scalar::Scalar;

/// The integers `C_{m,alpha}` for `1 <= alpha <= m <= k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmAlphaTable {
    k: u32,
    // rows[m - 1][alpha - 1]
    rows: Vec<Vec<Integer>>,
}

impl CmAlphaTable {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        let rows = (1..=k)
            .map(|m| (1..=m).map(|alpha| positive_composition_sum(m, alpha)).collect())
            .collect();
        Ok(CmAlphaTable { k, rows })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `C_{m,alpha}`, zero outside `1 <= alpha <= m`.
    pub fn get(&self, m: u32, alpha: u32) -> Integer {
        if alpha == 0 || alpha > m || m > self.k {
            return Integer::new();
        }
        self.rows[m as usize - 1][alpha as usize - 1].clone()
    }
}

/// Sum over compositions of `m` into `alpha` positive parts of `(2m)! / prod (2m_i)!`.
fn positive_composition_sum(m: u32, alpha: u32) -> Integer {
    fn rec(remaining: u32, slots: u32, acc: Integer, total: &mut Integer) {
        if slots == 1 {
            *total += acc;
            return;
        }
        // leave at least one unit for each later slot
        for part in 1..=remaining - (slots - 1) {
            let b = Integer::from(Integer::binomial_u(2 * remaining, 2 * part));
            rec(remaining - part, slots - 1, Integer::from(&acc * &b), total);
        }
    }
    let mut total = Integer::new();
    rec(m, alpha, Integer::from(1), &mut total);
    total
}

pub fn cm_alpha_table(k: u32) -> Result<CmAlphaTable> {
    CmAlphaTable::new(k)
}

/// Masses `mu_1..mu_k`, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuVector<T> {
    values: Vec<T>,
    strictly_decreasing: bool,
}

impl<T: Scalar> MuVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("mass vector", "empty"));
        }
        for v in &values {
            if v.sign() != Ordering::Greater || v.cmp_value(&v.one_like()) == Ordering::Greater {
                return Err(Error::InfeasibleMass(v.to_text()));
            }
        }
        let strictly_decreasing = values
            .windows(2)
            .all(|w| w[0].cmp_value(&w[1]) == Ordering::Greater);
        Ok(MuVector {
            values,
            strictly_decreasing,
        })
    }

    /// Like [`MuVector::new`] but rejects anything that is not strictly decreasing.
    pub fn strictly_decreasing(values: Vec<T>) -> Result<Self> {
        let mu = Self::new(values)?;
        if !mu.strictly_decreasing {
            return Err(Error::Degenerate(
                "masses must satisfy mu_1 > mu_2 > ... > mu_k".into(),
            ));
        }
        Ok(mu)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.strictly_decreasing
    }

    pub fn k(&self) -> u32 {
        self.values.len() as u32
    }

    fn like(&self) -> &T {
        &self.values[0]
    }
}

/// `(H_1, ..., H_k)` at some mass vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HValues<T>(pub Vec<T>);

impl<T: Scalar> HValues<T> {
    pub fn at(mu: &MuVector<T>, table: &CmAlphaTable) -> Result<Self> {
        check_table(mu, table)?;
        let e = elem_sym_all(mu.values());
        Ok(HValues((1..=mu.k()).map(|m| h_from_elem(m, &e, table)).collect()))
    }

    /// `H_m`, with `H_0 = 1`.
    pub fn get(&self, m: u32) -> T {
        if m == 0 {
            self.0[0].one_like()
        } else {
            self.0[m as usize - 1].clone()
        }
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }
}

fn check_table<T: Scalar>(mu: &MuVector<T>, table: &CmAlphaTable) -> Result<()> {
    if table.k() < mu.k() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: table.k() as usize,
        });
    }
    Ok(())
}

/// `[P_0, P_1, ..., P_n]` for the given values.
pub(crate) fn elem_sym_all<T: Scalar>(values: &[T]) -> Vec<T> {
    let like = &values[0];
    let mut e = vec![like.zero_like(); values.len() + 1];
    e[0] = like.one_like();
    for (i, x) in values.iter().enumerate() {
        for a in (1..=i + 1).rev() {
            let add = e[a - 1].mul_ref(x);
            e[a] = e[a].add_ref(&add);
        }
    }
    e
}

/// `P_alpha(mu)`, with `P_0 = 1`.
pub fn elem_sym<T: Scalar>(mu: &MuVector<T>, alpha: u32) -> Result<T> {
    if alpha > mu.k() {
        return Err(Error::IndexOutOfRange(format!("alpha = {alpha} > k = {}", mu.k())));
    }
    Ok(elem_sym_all(mu.values()).swap_remove(alpha as usize))
}

/// `P_{beta,alpha}`: the elementary symmetric polynomial of degree `alpha` in
/// the masses other than `mu_beta` (1-based), via
/// `P_{beta,alpha} = sum_t (-1)^t mu_beta^t P_{alpha-t}`.
pub fn elem_sym_excl<T: Scalar>(mu: &MuVector<T>, beta: u32, alpha: u32) -> Result<T> {
    check_beta(mu, beta)?;
    if alpha + 1 > mu.k() {
        return Err(Error::IndexOutOfRange(format!(
            "alpha = {alpha} must be at most k - 1 = {}",
            mu.k() - 1
        )));
    }
    let e = elem_sym_all(mu.values());
    Ok(excl_from_elem(&e, &mu.values()[beta as usize - 1], alpha))
}

fn check_beta<T: Scalar>(mu: &MuVector<T>, beta: u32) -> Result<()> {
    if beta == 0 || beta > mu.k() {
        return Err(Error::IndexOutOfRange(format!("beta = {beta}, k = {}", mu.k())));
    }
    Ok(())
}

fn excl_from_elem<T: Scalar>(e: &[T], mu_beta: &T, alpha: u32) -> T {
    let mut acc = mu_beta.zero_like();
    let mut power = mu_beta.one_like();
    for t in 0..=alpha as usize {
        let term = power.mul_ref(&e[alpha as usize - t]);
        acc = if t % 2 == 0 { acc.add_ref(&term) } else { acc.sub_ref(&term) };
        power = power.mul_ref(mu_beta);
    }
    acc
}

fn h_from_elem<T: Scalar>(m: u32, e: &[T], table: &CmAlphaTable) -> T {
    let like = &e[0];
    if m == 0 {
        return like.one_like();
    }
    (1..=m.min(e.len() as u32 - 1)).fold(like.zero_like(), |acc, alpha| {
        acc.add_ref(&like.integer_like(&table.get(m, alpha)).mul_ref(&e[alpha as usize]))
    })
}

pub(crate) fn grad_h_from_elem<T: Scalar>(m: u32, e: &[T], mu_beta: &T, table: &CmAlphaTable) -> T {
    let like = &e[0];
    if m == 0 {
        return like.zero_like();
    }
    let k = e.len() as u32 - 1;
    (1..=m.min(k)).fold(like.zero_like(), |acc, alpha| {
        let excl = excl_from_elem(e, mu_beta, alpha - 1);
        acc.add_ref(&like.integer_like(&table.get(m, alpha)).mul_ref(&excl))
    })
}

fn check_m<T: Scalar>(mu: &MuVector<T>, m: u32) -> Result<()> {
    if m == 0 || m > mu.k() {
        return Err(Error::IndexOutOfRange(format!("m = {m}, k = {}", mu.k())));
    }
    Ok(())
}

fn check_nu<T: Scalar>(nu: &T) -> Result<()> {
    if nu.sign() == Ordering::Less || nu.cmp_value(&nu.one_like()) == Ordering::Greater {
        return Err(Error::InfeasibleMass(nu.to_text()));
    }
    Ok(())
}

pub fn eval_h<T: Scalar>(m: u32, mu: &MuVector<T>, table: &CmAlphaTable) -> Result<T> {
    check_m(mu, m)?;
    check_table(mu, table)?;
    Ok(h_from_elem(m, &elem_sym_all(mu.values()), table))
}

/// `sum_{l=1}^{m} C(2m, 2l) j^{2l} X_{m-l}` for a sequence `X`.
fn nu_weighted_sum<T: Scalar>(m: u32, j: u64, like: &T, x: impl Fn(u32) -> T) -> T {
    let j_sq = like.integer_like(&Integer::from(j).square());
    let mut j_pow = like.one_like();
    let mut acc = like.zero_like();
    for l in 1..=m {
        j_pow = j_pow.mul_ref(&j_sq);
        let b = like.integer_like(&Integer::from(Integer::binomial_u(2 * m, 2 * l)));
        acc = acc.add_ref(&b.mul_ref(&j_pow).mul_ref(&x(m - l)));
    }
    acc
}

pub fn eval_f<T: Scalar>(m: u32, j: u64, mu: &MuVector<T>, nu: &T, table: &CmAlphaTable) -> Result<T> {
    check_m(mu, m)?;
    check_table(mu, table)?;
    check_nu(nu)?;
    if j == 0 {
        return Err(Error::invalid("j", "must be at least 1"));
    }
    let e = elem_sym_all(mu.values());
    let h = h_from_elem(m, &e, table);
    let tail = nu_weighted_sum(m, j, mu.like(), |r| h_from_elem(r, &e, table));
    Ok(h.add_ref(&nu.mul_ref(&tail)))
}

/// `(F_1, ..., F_k)` at `(mu, nu)`.
pub fn eval_f_all<T: Scalar>(j: u64, mu: &MuVector<T>, nu: &T, table: &CmAlphaTable) -> Result<Vec<T>> {
    (1..=mu.k()).map(|m| eval_f(m, j, mu, nu, table)).collect()
}

/// `dH_m / dmu_beta = sum_alpha C_{m,alpha} P_{beta,alpha-1}`.
pub fn grad_h<T: Scalar>(m: u32, beta: u32, mu: &MuVector<T>, table: &CmAlphaTable) -> Result<T> {
    check_m(mu, m)?;
    check_beta(mu, beta)?;
    check_table(mu, table)?;
    let e = elem_sym_all(mu.values());
    Ok(grad_h_from_elem(m, &e, &mu.values()[beta as usize - 1], table))
}

/// Jacobian of `(F_1, ..., F_k)` in `mu`, plus the column of `nu`-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianF<T> {
    pub j: u64,
    pub nu: T,
    /// `matrix[m - 1][beta - 1] = dF_m / dmu_beta`
    pub matrix: Vec<Vec<T>>,
    /// `nu_column[m - 1] = dF_m / dnu = sum_l C(2m, 2l) j^{2l} H_{m-l}`
    pub nu_column: Vec<T>,
}

pub fn jacobian_f<T: Scalar>(j: u64, mu: &MuVector<T>, nu: &T, table: &CmAlphaTable) -> Result<JacobianF<T>> {
    check_table(mu, table)?;
    check_nu(nu)?;
    if j == 0 {
        return Err(Error::invalid("j", "must be at least 1"));
    }
    let e = elem_sym_all(mu.values());
    let k = mu.k();
    let like = mu.like();
    let matrix = (1..=k)
        .map(|m| {
            mu.values()
                .iter()
                .map(|mu_beta| {
                    let g = grad_h_from_elem(m, &e, mu_beta, table);
                    let tail = nu_weighted_sum(m, j, like, |r| grad_h_from_elem(r, &e, mu_beta, table));
                    g.add_ref(&nu.mul_ref(&tail))
                })
                .collect()
        })
        .collect();
    let nu_column = (1..=k)
        .map(|m| nu_weighted_sum(m, j, like, |r| h_from_elem(r, &e, table)))
        .collect();
    Ok(JacobianF {
        j,
        nu: nu.clone(),
        matrix,
        nu_column,
    })
}

/// `prod_{i<j} (mu_j - mu_i)`, the determinant of the matrix with rows `mu^0, mu^1, ..., mu^{k-1}`.
pub fn vandermonde_det<T: Scalar>(values: &[T]) -> T {
    let mut acc = values[0].one_like();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            acc = acc.mul_ref(&values[j].sub_ref(&values[i]));
        }
    }
    acc
}

/// Outcome of [`vandermonde_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct VandermondeCheck<T> {
    pub det_jacobian: T,
    pub det_vandermonde: T,
    pub ratio: T,
    /// Precision the check finally ran at (`None` when exact).
    pub precision_bits: Option<u32>,
}

/// `det J(mu, 0)`, the Vandermonde determinant and their ratio, which is
/// `prod_m (-1)^{m-1} C_{m,m}` for every strictly decreasing `mu`.
///
/// Float inputs whose determinant falls inside the guard band are retried at
/// doubled precision, at most twice.
pub fn vandermonde_check<T: Scalar>(mu: &MuVector<T>, table: &CmAlphaTable) -> Result<VandermondeCheck<T>> {
    if !mu.is_strictly_decreasing() {
        return Err(Error::Degenerate("tied or unordered masses give a vanishing Vandermonde determinant".into()));
    }
    let mut current = mu.clone();
    for attempt in 0..3 {
        let zero = current.like().zero_like();
        let jac = jacobian_f(1, &current, &zero, table)?;
        let det_jacobian = determinant(&jac.matrix)?;
        if det_is_nonzero(&det_jacobian, &jac.matrix) {
            let det_vandermonde = vandermonde_det(current.values());
            let ratio = det_jacobian.div_ref(&det_vandermonde);
            return Ok(VandermondeCheck {
                precision_bits: det_jacobian.precision_bits(),
                det_jacobian,
                det_vandermonde,
                ratio,
            });
        }
        match current.like().precision_bits() {
            Some(bits) if attempt < 2 => {
                let raised = current.values().iter().map(|v| v.at_precision(bits * 2)).collect();
                current = MuVector::new(raised)?;
            }
            bits => return Err(Error::Singular { precision: bits.unwrap_or(0) }),
        }
    }
    unreachable!("loop returns on every path")
}

/// `prod_m (-1)^{m-1} C_{m,m}`, the exact value of `det J(mu, 0) / det V`.
pub fn vandermonde_ratio_constant(table: &CmAlphaTable, k: u32) -> Integer {
    (1..=k).fold(Integer::from(1), |acc, m| {
        let c = table.get(m, m);
        let signed = if m % 2 == 0 { -c } else { c };
        acc * signed
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::{Float, Rational};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn mu(vals: &[(i64, i64)]) -> MuVector<Rational> {
        MuVector::new(vals.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
    }

    #[test]
    fn cm_alpha_small_tables() {
        let t = cm_alpha_table(2).unwrap();
        assert_eq!(t.get(1, 1), 1);
        assert_eq!(t.get(2, 1), 1);
        assert_eq!(t.get(2, 2), 6);
        let t = cm_alpha_table(3).unwrap();
        assert_eq!(t.get(3, 3), 90);
        assert_eq!(t.get(3, 2), 30);
        assert_eq!(t.get(3, 1), 1);
        assert_eq!(t.get(2, 3), 0);
        assert!(cm_alpha_table(0).is_err());
    }

    #[test]
    fn elementary_symmetric_examples() {
        let m = mu(&[(2, 3), (1, 3)]);
        assert_eq!(elem_sym(&m, 0).unwrap(), 1);
        assert_eq!(elem_sym(&m, 1).unwrap(), 1);
        assert_eq!(elem_sym(&m, 2).unwrap(), q(2, 9));
        assert!(elem_sym(&m, 3).is_err());
        assert_eq!(elem_sym_excl(&m, 1, 1).unwrap(), q(1, 3));
        assert_eq!(elem_sym_excl(&m, 2, 0).unwrap(), 1);
        assert!(elem_sym_excl(&m, 3, 0).is_err());
        assert!(elem_sym_excl(&m, 1, 2).is_err());
        let m3 = mu(&[(1, 2), (1, 3), (1, 4)]);
        assert_eq!(elem_sym_excl(&m3, 2, 2).unwrap(), q(1, 8));
    }

    #[test]
    fn h_and_f_examples() {
        let t = cm_alpha_table(2).unwrap();
        let m = mu(&[(2, 3), (1, 3)]);
        assert_eq!(eval_h(1, &m, &t).unwrap(), 1);
        assert_eq!(eval_h(2, &m, &t).unwrap(), q(7, 3));
        assert_eq!(eval_h(2, &mu(&[(1, 2), (1, 3)]), &t).unwrap(), q(11, 6));
        assert!(eval_h(3, &m, &t).is_err());

        assert_eq!(eval_f(2, 3, &m, &q(0, 1), &t).unwrap(), q(7, 3));
        assert_eq!(eval_f(2, 1, &m, &q(1, 10), &t).unwrap(), q(91, 30));
        let single = mu(&[(2, 5)]);
        let t1 = cm_alpha_table(1).unwrap();
        assert_eq!(eval_f(1, 2, &single, &q(1, 7), &t1).unwrap(), q(2, 5) + q(4, 7));
        assert!(eval_f(1, 2, &single, &q(-1, 7), &t1).is_err());
        assert!(eval_f(1, 2, &single, &q(8, 7), &t1).is_err());
    }

    #[test]
    fn gradient_and_jacobian_examples() {
        let t = cm_alpha_table(2).unwrap();
        let m = mu(&[(2, 3), (1, 3)]);
        assert_eq!(grad_h(1, 1, &m, &t).unwrap(), 1);
        assert_eq!(grad_h(1, 2, &m, &t).unwrap(), 1);
        assert_eq!(grad_h(2, 1, &m, &t).unwrap(), 3);
        let jac = jacobian_f(1, &m, &q(0, 1), &t).unwrap();
        assert_eq!(jac.matrix, vec![vec![q(1, 1), q(1, 1)], vec![q(3, 1), q(5, 1)]]);
        // dF/dnu at j = 1: row 1 is j^2, row 2 is 6 j^2 H_1 + j^4
        assert_eq!(jac.nu_column, vec![q(1, 1), q(7, 1)]);
    }

    #[test]
    fn vandermonde_examples() {
        let t = cm_alpha_table(2).unwrap();
        let check = vandermonde_check(&mu(&[(2, 3), (1, 3)]), &t).unwrap();
        assert_eq!(check.det_jacobian, 2);
        assert_eq!(check.det_vandermonde, q(-1, 3));
        assert_eq!(check.ratio, -6);
        assert_eq!(vandermonde_ratio_constant(&t, 2), -6);
        assert!(matches!(
            vandermonde_check(&mu(&[(1, 3), (1, 3)]), &t),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn float_vandermonde_escalates_on_near_ties() {
        let t = cm_alpha_table(2).unwrap();
        let a = Float::with_val(128, 1) / 2u32;
        // a gap of 2^-70 is inside the 2^-64 guard band at 128 bits, outside it at 256
        let b = Float::with_val(256, &a) - crate::scalar::pow2(256, -70);
        let m = MuVector::new(vec![a.at_precision(256).at_precision(128), b.at_precision(128)]);
        // b rounds to a at 128 bits only if the gap is below the ulp; 2^-70 is representable
        let m = m.unwrap();
        assert!(m.is_strictly_decreasing());
        let check = vandermonde_check(&m, &t).unwrap();
        assert_eq!(check.precision_bits, Some(256));
        assert_eq!(check.ratio.to_f64().round(), -6.0);
    }
}
