//! Even moments of sums of independent symmetric three-valued variables.
//!
//! For independent symmetric summands the `2k`-th moment of the sum is a
//! polynomial in the even moments of the summands:
//!
//! ```text
//! E(f_1 + ... + f_n)^{2k} = sum_{k_1+...+k_n = k} (2k)! / prod (2k_i)!  * prod E f_i^{2k_i}
//! ```
//!
//! with `E f^0 = 1`. [`even_moment_of_sum`] evaluates this; [`convolve`] is the
//! brute-force oracle that enumerates the product space.

use std::cmp::Ordering;

use rug::{Float, Integer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{powf, Scalar};

/// Default cap on the number of product-space atoms before merging (`3^16`).
pub const DEFAULT_ATOM_CAP: u128 = 43_046_721;

/// A symmetric variable taking `+scale` and `-scale` with probability
/// `mass / 2` each and `0` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricAtom<T> {
    scale: T,
    mass: T,
}

impl<T: Scalar> SymmetricAtom<T> {
    pub fn new(scale: T, mass: T) -> Result<Self> {
        if scale.sign() != Ordering::Greater {
            return Err(Error::invalid("scale", format!("{} is not positive", scale.to_text())));
        }
        if mass.sign() != Ordering::Greater || mass.cmp_value(&mass.one_like()) == Ordering::Greater {
            return Err(Error::InfeasibleMass(mass.to_text()));
        }
        Ok(SymmetricAtom { scale, mass })
    }

    /// Unit-scale atom, the `{-1, 0, 1}`-valued case.
    pub fn unit(mass: T) -> Result<Self> {
        let one = mass.one_like();
        Self::new(one, mass)
    }

    pub fn scale(&self) -> &T {
        &self.scale
    }

    pub fn mass(&self) -> &T {
        &self.mass
    }

    /// `E g^{2l} = scale^{2l} * mass` for `l >= 1`, and `1` for `l = 0`.
    pub fn moment_table(&self, k: u32) -> Vec<T> {
        let sq = self.scale.mul_ref(&self.scale);
        let mut out = Vec::with_capacity(k as usize + 1);
        out.push(self.mass.one_like());
        let mut power = sq.clone();
        for _ in 1..=k {
            out.push(power.mul_ref(&self.mass));
            power = power.mul_ref(&sq);
        }
        out
    }
}

/// A sum of mutually independent [`SymmetricAtom`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSum<T> {
    terms: Vec<SymmetricAtom<T>>,
}

impl<T: Scalar> IndependentSum<T> {
    pub fn new(terms: Vec<SymmetricAtom<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("independent sum", "no terms"));
        }
        Ok(IndependentSum { terms })
    }

    pub fn terms(&self) -> &[SymmetricAtom<T>] {
        &self.terms
    }

    /// `h = g_1 + ... + g_k` with unit scales and the given masses.
    pub fn unit_sum(masses: &[T]) -> Result<Self> {
        let terms = masses
            .iter()
            .cloned()
            .map(SymmetricAtom::unit)
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms)
    }

    /// `f = h + j g'` where `g'` has mass `nu`; a zero `nu` drops the extra term.
    pub fn with_scaled_term(masses: &[T], j: u64, nu: &T) -> Result<Self> {
        let mut sum = Self::unit_sum(masses)?;
        if !nu.is_zero() {
            let scale = nu.int_like(j as i64);
            sum.terms.push(SymmetricAtom::new(scale, nu.clone())?);
        }
        Ok(sum)
    }

    /// Even moments `E(sum)^{2l}` for `l = 0..=k`.
    pub fn moment_table(&self, k: u32) -> Vec<T> {
        let tables: Vec<Vec<T>> = self.terms.iter().map(|t| t.moment_table(k)).collect();
        let like = self.terms[0].mass.clone();
        (0..=k)
            .map(|m| moment_of_sum_from_tables(&tables, m, &like))
            .collect()
    }
}

fn half_order(order: u32) -> Result<u32> {
    if order == 0 || order % 2 == 1 {
        return Err(Error::InvalidOrder(order));
    }
    Ok(order / 2)
}

pub fn even_moment_single<T: Scalar>(v: &SymmetricAtom<T>, order: u32) -> Result<T> {
    let l = half_order(order)?;
    Ok(v.moment_table(l).pop().expect("table has l + 1 entries"))
}

/// Every nonnegative composition `(k_1, ..., k_n)` of `k` with its coefficient
/// `C(2k, 2k_1) C(2(k - k_1), 2k_2) ... C(2k_n, 2k_n)`.
///
/// Compositions are listed in lexicographically decreasing order of `k_1`,
/// then `k_2`, and so on.
pub fn moment_coefficients(k: u32, n: usize) -> Result<Vec<(Vec<u32>, Integer)>> {
    if k == 0 || n == 0 {
        return Err(Error::invalid("composition shape", format!("k = {k}, n = {n}")));
    }
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(n);
    push_compositions(k, n, &mut parts, Integer::from(1), &mut out);
    Ok(out)
}

fn push_compositions(
    remaining: u32,
    slots: usize,
    parts: &mut Vec<u32>,
    coef: Integer,
    out: &mut Vec<(Vec<u32>, Integer)>,
) {
    if slots == 1 {
        parts.push(remaining);
        out.push((parts.clone(), coef));
        parts.pop();
        return;
    }
    for part in (0..=remaining).rev() {
        let binom = Integer::from(Integer::binomial_u(2 * remaining, 2 * part));
        parts.push(part);
        push_compositions(remaining - part, slots - 1, parts, Integer::from(&coef * &binom), out);
        parts.pop();
    }
}

/// `E(f_1 + ... + f_n)^{2m}` from per-summand tables `tables[i][l] = E f_i^{2l}`.
///
/// The composition sum factorizes along the telescoped binomial product, so it
/// is accumulated right to left: `S_i(r) = sum_t C(2r, 2t) E f_i^{2t} S_{i+1}(r - t)`.
pub fn moment_of_sum_from_tables<T: Scalar>(tables: &[Vec<T>], m: u32, like: &T) -> T {
    let m = m as usize;
    // tail[r] = S_{i+1}(r); the empty sum has moment 1 at r = 0 and 0 otherwise.
    let mut tail: Vec<T> = (0..=m)
        .map(|r| if r == 0 { like.one_like() } else { like.zero_like() })
        .collect();
    for table in tables.iter().rev() {
        let next: Vec<T> = (0..=m)
            .map(|r| {
                let mut acc = like.zero_like();
                for t in 0..=r {
                    if tail[r - t].is_zero() {
                        continue;
                    }
                    let binom = Integer::from(Integer::binomial_u(2 * r as u32, 2 * t as u32));
                    let term = table[t].mul_ref(&tail[r - t]).mul_ref(&like.integer_like(&binom));
                    acc = acc.add_ref(&term);
                }
                acc
            })
            .collect();
        tail = next;
    }
    tail.swap_remove(m)
}

pub fn even_moment_of_sum<T: Scalar>(spec: &IndependentSum<T>, order: u32) -> Result<T> {
    let k = half_order(order)?;
    Ok(spec.moment_table(k).swap_remove(k as usize))
}

/// A finite distribution as `(value, probability)` atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<T> {
    atoms: Vec<(T, T)>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    /// Builds a distribution, merging equal values. Probabilities are not
    /// renormalized.
    pub fn from_atoms(mut atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("distribution", "no atoms"));
        }
        if let Some((_, p)) = atoms.iter().find(|(_, p)| p.sign() == Ordering::Less) {
            return Err(Error::invalid("probability", p.to_text()));
        }
        atoms.sort_by(|a, b| a.0.cmp_value(&b.0));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some((last, q)) if last.cmp_value(&v) == Ordering::Equal => *q = q.add_ref(&p),
                _ => merged.push((v, p)),
            }
        }
        Ok(DiscreteDistribution { atoms: merged })
    }

    /// Point mass at `value`.
    pub fn point(value: T) -> Self {
        let one = value.one_like();
        DiscreteDistribution {
            atoms: vec![(value, one)],
        }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn total_probability(&self) -> T {
        let like = &self.atoms[0].1;
        self.atoms
            .iter()
            .fold(like.zero_like(), |acc, (_, p)| acc.add_ref(p))
    }

    /// `E X^r` for any nonnegative integer `r`, odd orders included.
    pub fn raw_moment(&self, r: u32) -> T {
        let like = &self.atoms[0].1;
        self.atoms
            .iter()
            .fold(like.zero_like(), |acc, (v, p)| acc.add_ref(&v.pow_u(r).mul_ref(p)))
    }

    /// The distribution of `-X`.
    pub fn negated(&self) -> Self {
        let mut atoms: Vec<(T, T)> = self
            .atoms
            .iter()
            .map(|(v, p)| (v.neg_ref(), p.clone()))
            .collect();
        atoms.reverse();
        DiscreteDistribution { atoms }
    }

    /// Distribution of `X + Y` for independent `X` (self) and `Y`.
    pub fn add_independent(&self, other: &Self) -> Result<Self> {
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for (v, p) in &self.atoms {
            for (w, q) in &other.atoms {
                atoms.push((v.add_ref(w), p.mul_ref(q)));
            }
        }
        Self::from_atoms(atoms)
    }

    /// Distribution of `c X`.
    pub fn scaled(&self, c: &T) -> Result<Self> {
        Self::from_atoms(
            self.atoms
                .iter()
                .map(|(v, p)| (v.mul_ref(c), p.clone()))
                .collect(),
        )
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.atoms
                .iter()
                .map(|(v, p)| json!({ "value": v.to_text(), "prob": p.to_text() }))
                .collect(),
        )
    }
}

impl DiscreteDistribution<Float> {
    /// Rebuilds the atoms of [`DiscreteDistribution::to_json`] at precision `prec`.
    pub fn from_json(value: &Value, prec: u32) -> Result<Self> {
        let arr = value
            .as_array()
            .ok_or_else(|| Error::Schema("distribution must be an array".into()))?;
        let mut atoms = Vec::with_capacity(arr.len());
        for atom in arr {
            let field = |name: &str| {
                atom.get(name)
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Schema(format!("atom is missing string field {name:?}")))
            };
            let value = crate::scalar::parse_rational(field("value")?)?;
            let prob = crate::scalar::parse_rational(field("prob")?)?;
            atoms.push((Float::with_val(prec, &value), Float::with_val(prec, &prob)));
        }
        Self::from_atoms(atoms)
    }
}

/// `E|X|^r` for real `r > 0`, at the precision of `r`.
pub fn abs_moment<T: Scalar>(dist: &DiscreteDistribution<T>, r: &Float) -> Result<Float> {
    if r.cmp0() != Some(Ordering::Greater) {
        return Err(Error::invalid("moment exponent", r.to_string()));
    }
    let prec = r.prec();
    let mut acc = Float::with_val(prec, 0);
    for (v, p) in dist.atoms() {
        let mag = v.to_prec_real(prec).abs();
        if mag.is_zero() {
            continue;
        }
        acc += powf(&mag, r) * p.to_prec_real(prec);
    }
    Ok(acc)
}

/// `(E|X|^r)^{1/r}`.
pub fn abs_norm<T: Scalar>(dist: &DiscreteDistribution<T>, r: &Float) -> Result<Float> {
    let m = abs_moment(dist, r)?;
    let inv = Float::with_val(r.prec(), 1) / r;
    Ok(powf(&m, &inv))
}

/// Exact distribution of the sum by enumeration of the `3^n` product space,
/// merged after each term.
pub fn convolve<T: Scalar>(spec: &IndependentSum<T>) -> Result<DiscreteDistribution<T>> {
    convolve_with_cap(spec, DEFAULT_ATOM_CAP)
}

pub fn convolve_with_cap<T: Scalar>(
    spec: &IndependentSum<T>,
    cap: u128,
) -> Result<DiscreteDistribution<T>> {
    let atoms = 3u128.checked_pow(spec.terms.len() as u32).unwrap_or(u128::MAX);
    if atoms > cap {
        return Err(Error::ProductSpaceTooLarge { atoms, cap });
    }
    let like = spec.terms[0].mass.clone();
    let mut dist = DiscreteDistribution::point(like.zero_like());
    for term in &spec.terms {
        dist = dist.add_independent(&atom_distribution(term))?;
    }
    Ok(dist)
}

/// The three atoms `{-a, 0, a}` of a single symmetric variable.
pub fn atom_distribution<T: Scalar>(v: &SymmetricAtom<T>) -> DiscreteDistribution<T> {
    let two = v.mass.int_like(2);
    let half = v.mass.div_ref(&two);
    let zero_prob = v.mass.one_like().sub_ref(&v.mass);
    let mut atoms = vec![(v.scale.neg_ref(), half.clone())];
    if !zero_prob.is_zero() {
        atoms.push((v.scale.zero_like(), zero_prob));
    }
    atoms.push((v.scale.clone(), half));
    DiscreteDistribution { atoms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn atom(scale: Rational, mass: Rational) -> SymmetricAtom<Rational> {
        SymmetricAtom::new(scale, mass).unwrap()
    }

    #[test]
    fn single_moments() {
        let g = atom(q(1, 1), q(1, 3));
        assert_eq!(even_moment_single(&g, 2).unwrap(), q(1, 3));
        assert_eq!(even_moment_single(&g, 8).unwrap(), q(1, 3));
        let g = atom(q(2, 1), q(1, 4));
        assert_eq!(even_moment_single(&g, 4).unwrap(), q(4, 1));
        assert!(matches!(even_moment_single(&g, 3), Err(Error::InvalidOrder(3))));
        assert!(matches!(even_moment_single(&g, 0), Err(Error::InvalidOrder(0))));
    }

    #[test]
    fn atom_validation() {
        assert!(SymmetricAtom::new(q(1, 1), q(0, 1)).is_err());
        assert!(SymmetricAtom::new(q(1, 1), q(3, 2)).is_err());
        assert!(SymmetricAtom::new(q(-1, 1), q(1, 2)).is_err());
        assert!(SymmetricAtom::new(q(1, 1), q(1, 1)).is_ok());
        assert!(IndependentSum::<Rational>::new(vec![]).is_err());
    }

    #[test]
    fn coefficient_lists() {
        let c = moment_coefficients(2, 2).unwrap();
        let expect: Vec<(Vec<u32>, Integer)> = vec![
            (vec![2, 0], 1.into()),
            (vec![1, 1], 6.into()),
            (vec![0, 2], 1.into()),
        ];
        assert_eq!(c, expect);
        assert_eq!(moment_coefficients(1, 1).unwrap(), vec![(vec![1], Integer::from(1))]);
        let c = moment_coefficients(3, 2).unwrap();
        let coefs: Vec<i32> = c.iter().map(|(_, c)| c.to_i32().unwrap()).collect();
        assert_eq!(coefs, vec![1, 15, 15, 1]);
        assert!(moment_coefficients(0, 2).is_err());
    }

    #[test]
    fn sum_moments() {
        let spec = IndependentSum::new(vec![atom(q(1, 1), q(1, 2)), atom(q(1, 1), q(1, 3))]).unwrap();
        assert_eq!(even_moment_of_sum(&spec, 4).unwrap(), q(11, 6));
        assert_eq!(even_moment_of_sum(&spec, 2).unwrap(), q(5, 6));
        assert!(even_moment_of_sum(&spec, 5).is_err());
        let single = IndependentSum::unit_sum(&[q(2, 7)]).unwrap();
        for order in [2, 4, 6, 8] {
            assert_eq!(even_moment_of_sum(&single, order).unwrap(), q(2, 7));
        }
    }

    #[test]
    fn convolution_examples() {
        let one = IndependentSum::unit_sum(&[q(1, 2)]).unwrap();
        let d = convolve(&one).unwrap();
        assert_eq!(
            d.atoms(),
            &[(q(-1, 1), q(1, 4)), (q(0, 1), q(1, 2)), (q(1, 1), q(1, 4))]
        );
        let two = IndependentSum::unit_sum(&[q(1, 2), q(1, 3)]).unwrap();
        let d = convolve(&two).unwrap();
        assert_eq!(
            d.atoms(),
            &[
                (q(-2, 1), q(1, 24)),
                (q(-1, 1), q(1, 4)),
                (q(0, 1), q(5, 12)),
                (q(1, 1), q(1, 4)),
                (q(2, 1), q(1, 24)),
            ]
        );
        let signs = IndependentSum::unit_sum(&[q(1, 1), q(1, 1)]).unwrap();
        let d = convolve(&signs).unwrap();
        assert_eq!(
            d.atoms(),
            &[(q(-2, 1), q(1, 4)), (q(0, 1), q(1, 2)), (q(2, 1), q(1, 4))]
        );
    }

    #[test]
    fn cap_is_enforced() {
        let spec = IndependentSum::unit_sum(&vec![q(1, 2); 5]).unwrap();
        assert!(matches!(
            convolve_with_cap(&spec, 81),
            Err(Error::ProductSpaceTooLarge { atoms: 243, cap: 81 })
        ));
        assert!(convolve_with_cap(&spec, 243).is_ok());
    }

    #[test]
    fn fractional_abs_moment() {
        let two = IndependentSum::unit_sum(&[q(2, 3), q(1, 3)]).unwrap();
        let d = convolve(&two).unwrap();
        let r = Float::with_val(256, 4) / 3u32;
        let got = abs_moment(&d, &r).unwrap();
        // (2^{7/3} + 10) / 18
        let expect = (Float::with_val(256, 7) / 3u32).exp2() + 10u32;
        let expect = expect / 18u32;
        assert!(Float::with_val(256, &got - &expect).abs() < 1e-70);
        assert!((got.to_f64() - 0.835538).abs() < 1e-6);

        let two = Float::with_val(256, 2);
        assert_eq!(abs_moment(&d, &two).unwrap(), Float::with_val(256, 1));
        // masses (1/2, 1/3): P(|X| = 1) = 1/2, P(|X| = 2) = 1/12
        let d = convolve(&IndependentSum::unit_sum(&[q(1, 2), q(1, 3)]).unwrap()).unwrap();
        let expect = Float::with_val(256, 1) / 2u32 + (Float::with_val(256, 4) / 3u32).exp2() / 12u32;
        assert!(Float::with_val(256, abs_moment(&d, &r).unwrap() - &expect).abs() < 1e-70);
        let zero = DiscreteDistribution::point(q(0, 1));
        assert!(abs_moment(&zero, &two).unwrap().is_zero());
        assert!(abs_moment(&zero, &Float::with_val(128, 0)).is_err());
    }

    #[test]
    fn json_round_trip_for_float_atoms() {
        let spec = IndependentSum::unit_sum(&[Float::with_val(128, 0.5), Float::with_val(128, 0.25)]).unwrap();
        let d = convolve(&spec).unwrap();
        let back = DiscreteDistribution::from_json(&d.to_json(), 128).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rational_json_uses_fractions() {
        let d = convolve(&IndependentSum::unit_sum(&[q(1, 3)]).unwrap()).unwrap();
        let text = d.to_json().to_string();
        assert_eq!(
            text,
            r#"[{"prob":"1/6","value":"-1"},{"prob":"2/3","value":"0"},{"prob":"1/6","value":"1"}]"#
        );
    }
}
