//! The orthogonal projection onto a finite span, restricted to `L_p` of the
//! product probability space of the generators.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::ops::Pow;
use rug::{Float, Rational};

use super::span::FiniteSpan;
use crate::error::{Error, Result};
use crate::moments::convolve;

/// Largest product space [`build_projection`] will enumerate.
pub const PROJECTION_ATOM_CAP: u128 = 59_049;

/// `P f = sum_n <f, h_n> / ||h_n||_2^2 h_n`, with functions stored as their
/// values on the atoms of the product space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    probs: Vec<Rational>,
    basis: Vec<Vec<Rational>>,
    coeffs: Vec<Rational>,
}

impl ProjectionOperator {
    pub fn atoms(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Values of generator `n` on the atoms.
    pub fn generator(&self, n: usize) -> &[Rational] {
        &self.basis[n]
    }

    /// `1 / ||h_n||_2^2` per generator.
    pub fn coefficients(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn inner(&self, f: &[Rational], g: &[Rational]) -> Result<Rational> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(self
            .probs
            .iter()
            .zip(f.iter().zip(g))
            .map(|(p, (a, b))| Rational::from(a * b) * p)
            .sum())
    }

    /// `E f^2`.
    pub fn norm2_sq(&self, f: &[Rational]) -> Result<Rational> {
        self.inner(f, f)
    }

    pub fn apply(&self, f: &[Rational]) -> Result<Vec<Rational>> {
        let mut out = vec![Rational::new(); self.atoms()];
        for (h, c) in self.basis.iter().zip(&self.coeffs) {
            let w = self.inner(f, h)? * c;
            if w.cmp0().is_eq() {
                continue;
            }
            for (o, hv) in out.iter_mut().zip(h) {
                *o += Rational::from(hv * &w);
            }
        }
        Ok(out)
    }

    /// The operator with every quantity rounded to `prec` bits.
    pub fn to_real(&self, prec: u32) -> RealProjection {
        let conv = |v: &[Rational]| v.iter().map(|x| Float::with_val(prec, x)).collect::<Vec<_>>();
        RealProjection {
            prec,
            probs: conv(&self.probs),
            basis: self.basis.iter().map(|h| conv(h)).collect(),
            coeffs: conv(&self.coeffs),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.atoms() {
            return Err(Error::DimensionMismatch { expected: self.atoms(), got: len });
        }
        Ok(())
    }
}

/// Floating-point copy of a [`ProjectionOperator`].
#[derive(Debug, Clone)]
pub struct RealProjection {
    prec: u32,
    probs: Vec<Float>,
    basis: Vec<Vec<Float>>,
    coeffs: Vec<Float>,
}

impl RealProjection {
    pub fn apply(&self, f: &[Float]) -> Vec<Float> {
        let mut out = vec![Float::new(self.prec); f.len()];
        for (h, c) in self.basis.iter().zip(&self.coeffs) {
            let mut w = Float::new(self.prec);
            for ((p, hv), fv) in self.probs.iter().zip(h).zip(f) {
                w += Float::with_val(self.prec, p * hv) * fv;
            }
            w *= c;
            for (o, hv) in out.iter_mut().zip(h) {
                *o += Float::with_val(self.prec, hv * &w);
            }
        }
        out
    }

    /// `(E|f|^r)^{1/r}`.
    pub fn norm(&self, f: &[Float], r: &Float) -> Float {
        let mut acc = Float::new(self.prec);
        for (p, v) in self.probs.iter().zip(f) {
            if v.is_zero() {
                continue;
            }
            let mag = Float::with_val(self.prec, v.abs_ref());
            acc += Float::with_val(self.prec, mag.pow(r)) * p;
        }
        let inv = Float::with_val(self.prec, 1) / r;
        acc.pow(inv)
    }
}

/// Builds `P` on the product of the generators' exact distributions.
pub fn build_projection(span: &FiniteSpan<Rational>, cap: u128) -> Result<ProjectionOperator> {
    let dists = span
        .generators()
        .iter()
        .map(convolve)
        .collect::<Result<Vec<_>>>()?;
    let atoms = dists
        .iter()
        .try_fold(1u128, |acc, d| acc.checked_mul(d.atoms().len() as u128))
        .unwrap_or(u128::MAX);
    if atoms > cap {
        return Err(Error::ProductSpaceTooLarge { atoms, cap });
    }
    let mut probs = vec![Rational::from(1)];
    let mut basis: Vec<Vec<Rational>> = Vec::new();
    for d in &dists {
        let size = probs.len();
        let mut next_probs = Vec::with_capacity(size * d.atoms().len());
        let mut next_basis: Vec<Vec<Rational>> = vec![Vec::new(); basis.len() + 1];
        for (i, p) in probs.iter().enumerate() {
            for (value, q) in d.atoms() {
                next_probs.push(Rational::from(p * q));
                for (nb, b) in next_basis.iter_mut().zip(&basis) {
                    nb.push(b[i].clone());
                }
                next_basis[basis.len()].push(value.clone());
            }
        }
        probs = next_probs;
        basis = next_basis;
    }
    let mut coeffs = Vec::with_capacity(basis.len());
    for (n, table) in span.tables().iter().enumerate() {
        let second = &table[1];
        if second.cmp0().is_eq() {
            return Err(Error::Degenerate(format!("generator {n} vanishes")));
        }
        coeffs.push(Rational::from(second.recip_ref()));
    }
    Ok(ProjectionOperator { probs, basis, coeffs })
}

/// Settings for [`projection_norm_lower_bound`].
#[derive(Debug, Clone)]
pub struct NormSearch {
    pub random_starts: usize,
    pub iters: usize,
    pub seed: u64,
    pub precision_bits: u32,
}

impl Default for NormSearch {
    fn default() -> Self {
        NormSearch { random_starts: 16, iters: 60, seed: 0, precision_bits: 128 }
    }
}

/// Lower bound for `||P||_{L_p -> L_p}` on the finite space.
///
/// Each start is refined by the dual power iteration
/// `f <- sign(w)|w|^{q-1}` with `w = P(sign(Pf)|Pf|^{p-1})`; the result is the
/// largest ratio `||Pf||_p / ||f||_p` seen. Generators are fixed by `P`
/// exactly, so the bound is never below 1.
pub fn projection_norm_lower_bound(op: &ProjectionOperator, p: u32, search: &NormSearch) -> Result<Float> {
    if p < 2 {
        return Err(Error::invalid("p", format!("{p} < 2")));
    }
    let prec = search.precision_bits;
    let real = op.to_real(prec);
    let pf = Float::with_val(prec, p);
    let q = Float::with_val(prec, &pf / Float::with_val(prec, &pf - 1u32));
    let q_minus = Float::with_val(prec, &q - 1u32);

    let mut best = Float::with_val(prec, 0);
    for n in 0..op.rank() {
        if op.apply(op.generator(n))? != op.generator(n) {
            return Err(Error::Degenerate(format!("generator {n} is not fixed by the projection")));
        }
        best = Float::with_val(prec, 1);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let ratio = |f: &[Float]| -> Option<Float> {
        let den = real.norm(f, &pf);
        if den.is_zero() {
            return None;
        }
        Some(real.norm(&real.apply(f), &pf) / den)
    };
    let signed_pow = |v: &Float, e: &Float| -> Float {
        let mag = Float::with_val(prec, v.abs_ref()).pow(e);
        match v.cmp0() {
            Some(Ordering::Less) => -mag,
            Some(Ordering::Greater) => mag,
            _ => Float::new(prec),
        }
    };
    let p_minus = Float::with_val(prec, p - 1);
    for _ in 0..search.random_starts {
        let mut f: Vec<Float> = (0..op.atoms())
            .map(|_| Float::with_val(prec, rng.gen_range(-1.0f64..=1.0)))
            .collect();
        for _ in 0..search.iters {
            if let Some(r) = ratio(&f) {
                if r > best {
                    best = r;
                }
            }
            let y = real.apply(&f);
            let z: Vec<Float> = y.iter().map(|v| signed_pow(v, &p_minus)).collect();
            let w = real.apply(&z);
            if w.iter().all(|v| v.is_zero()) {
                break;
            }
            f = w.iter().map(|v| signed_pow(v, &q_minus)).collect();
        }
        if let Some(r) = ratio(&f) {
            if r > best {
                best = r;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::IndependentSum;

    fn span(p: u32, masses: &[&[(i64, i64)]]) -> FiniteSpan<Rational> {
        let gens = masses
            .iter()
            .map(|m| IndependentSum::unit_sum(&m.iter().map(|&x| Rational::from(x)).collect::<Vec<_>>()).unwrap())
            .collect();
        FiniteSpan::new(p, gens).unwrap()
    }

    #[test]
    fn fixes_generators_and_kills_constants() {
        let s = span(4, &[&[(1, 2)], &[(1, 3)]]);
        let op = build_projection(&s, PROJECTION_ATOM_CAP).unwrap();
        assert_eq!(op.atoms(), 9);
        for n in 0..2 {
            assert_eq!(op.apply(op.generator(n)).unwrap(), op.generator(n));
        }
        let ones = vec![Rational::from(1); 9];
        assert!(op.apply(&ones).unwrap().iter().all(|x| x.cmp0().is_eq()));
    }

    #[test]
    fn square_of_a_single_generator_is_annihilated() {
        let s = span(4, &[&[(2, 5)]]);
        let op = build_projection(&s, PROJECTION_ATOM_CAP).unwrap();
        let sq: Vec<Rational> = op.generator(0).iter().map(|v| Rational::from(v * v)).collect();
        assert!(op.apply(&sq).unwrap().iter().all(|x| x.cmp0().is_eq()));
    }

    #[test]
    fn cap_is_enforced() {
        let s = span(4, &[&[(1, 2), (1, 3)], &[(1, 2), (1, 3)]]);
        assert!(matches!(build_projection(&s, 10), Err(Error::ProductSpaceTooLarge { .. })));
    }

    #[test]
    fn hilbert_case_has_norm_one() {
        let s = span(2, &[&[(1, 3)]]);
        let op = build_projection(&s, PROJECTION_ATOM_CAP).unwrap();
        let search = NormSearch { random_starts: 4, iters: 10, ..NormSearch::default() };
        let bound = projection_norm_lower_bound(&op, 2, &search).unwrap();
        let err = Float::with_val(128, &bound - 1u32).abs();
        assert!(err < Float::with_val(128, 1e-30));
    }

    #[test]
    fn lp_bound_is_at_least_one() {
        let s = span(4, &[&[(1, 2)], &[(1, 3)]]);
        let op = build_projection(&s, PROJECTION_ATOM_CAP).unwrap();
        let bound = projection_norm_lower_bound(&op, 4, &NormSearch::default()).unwrap();
        assert!(bound >= 1u32);
    }
}
