//! Finite spans of independent generators and the isometry spot check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::{Float, Integer, Rational};

use crate::certificate::ConstructionCertificate;
use crate::error::{Error, Result};
use crate::momentpoly::CmAlphaTable;
use crate::moments::{moment_of_sum_from_tables, IndependentSum};
use crate::scalar::{rational_round_up, real_to_rational, Scalar};

/// `n` independent generators with their even-moment tables up to order `p`.
#[derive(Debug, Clone)]
pub struct FiniteSpan<T> {
    p: u32,
    generators: Vec<IndependentSum<T>>,
    tables: Vec<Vec<T>>,
}

impl<T: Scalar> FiniteSpan<T> {
    pub fn new(p: u32, generators: Vec<IndependentSum<T>>) -> Result<Self> {
        if p < 2 || p % 2 == 1 {
            return Err(Error::invalid("p", format!("{p} is not an even integer >= 2")));
        }
        if generators.is_empty() {
            return Err(Error::invalid("span", "no generators"));
        }
        let tables = generators.iter().map(|g| g.moment_table(p / 2)).collect();
        Ok(FiniteSpan { p, generators, tables })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[IndependentSum<T>] {
        &self.generators
    }

    /// `tables[i][l] = E g_i^{2l}` for `l = 0..=p/2`.
    pub fn tables(&self) -> &[Vec<T>] {
        &self.tables
    }
}

/// `E(sum_i c_i g_i)^{order}` for an even `order <= p`.
pub fn span_norm<T: Scalar>(span: &FiniteSpan<T>, c: &[T], order: u32) -> Result<T> {
    if c.len() != span.len() {
        return Err(Error::DimensionMismatch { expected: span.len(), got: c.len() });
    }
    if order == 0 || order % 2 == 1 || order > span.p {
        return Err(Error::InvalidOrder(order));
    }
    let m = order / 2;
    let scaled: Vec<Vec<T>> = span
        .tables
        .iter()
        .zip(c)
        .map(|(table, ci)| {
            let sq = ci.mul_ref(ci);
            let mut power = sq.one_like();
            table[..=m as usize]
                .iter()
                .map(|t| {
                    let v = t.mul_ref(&power);
                    power = power.mul_ref(&sq);
                    v
                })
                .collect()
        })
        .collect();
    Ok(moment_of_sum_from_tables(&scaled, m, &span.tables[0][0]))
}

/// Outcome of [`isometry_check`].
#[derive(Debug, Clone)]
pub struct IsometryReport {
    pub trials: usize,
    pub generators: usize,
    pub seed: u64,
    /// Largest `|E(sum c f~)^{2m} - E(sum c h)^{2m}| / E(sum c h)^{2m}` over trials and `m`.
    pub max_relative_residual: Float,
    /// `(1 + R / min_m H_m(mu_bar))^k - 1` with `R` the largest stored residual bound.
    pub propagation_bound: Float,
}

impl IsometryReport {
    pub fn within_bound(&self) -> bool {
        self.max_relative_residual <= self.propagation_bound
    }
}

/// Compares the two spans of a certificate on random rational coefficient vectors.
///
/// Both sides are evaluated exactly: `h_j` from the rational base point and
/// `f~_j` from the exact values of the stored binary masses, so the only error
/// is the solver residual itself. Each moment of a sum is a positive
/// combination of products of at most `k` generator moments, and each of those
/// differs from its target by a relative factor of at most `R / min H_m`; the
/// bound follows.
pub fn isometry_check(cert: &ConstructionCertificate, trials: usize, seed: u64) -> Result<IsometryReport> {
    if cert.entries.is_empty() {
        return Err(Error::invalid("certificate", "no entries"));
    }
    let k = cert.k;
    let p = 2 * k;
    let prec = cert.precision_bits;
    let mu_bar = cert.ball.mu_bar.values().to_vec();
    let mut h_gens = Vec::new();
    let mut f_gens = Vec::new();
    for e in &cert.entries {
        h_gens.push(IndependentSum::unit_sum(&mu_bar)?);
        let masses = e.mu.iter().map(real_to_rational).collect::<Result<Vec<_>>>()?;
        f_gens.push(IndependentSum::with_scaled_term(&masses, e.j, &e.nu)?);
    }
    let h_span = FiniteSpan::new(p, h_gens)?;
    let f_span = FiniteSpan::new(p, f_gens)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Rational::new();
    for _ in 0..trials {
        let c: Vec<Rational> = (0..h_span.len())
            .map(|_| Rational::from((rng.gen_range(-1000i64..=1000), 1000)))
            .collect();
        for m in 1..=k {
            let lhs = span_norm(&h_span, &c, 2 * m)?;
            if lhs.cmp0().is_eq() {
                continue;
            }
            let rhs = span_norm(&f_span, &c, 2 * m)?;
            let rel = Rational::from(&rhs - &lhs).abs() / &lhs;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(IsometryReport {
        trials,
        generators: h_span.len(),
        seed,
        max_relative_residual: rational_round_up(&worst, prec),
        propagation_bound: rational_round_up(&propagation_bound(cert)?, prec),
    })
}

fn propagation_bound(cert: &ConstructionCertificate) -> Result<Rational> {
    let r = cert
        .entries
        .iter()
        .map(|e| real_to_rational(&e.exact_residual_bound))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .expect("non-empty");
    let h_min = cert.target.values().iter().min().expect("k >= 1").clone();
    let rho = (r / h_min) + 1u32;
    Ok(Rational::from(rug::ops::Pow::pow(&rho, cert.k)) - 1u32)
}

/// `C_k = sum_alpha C(k, alpha) C_{k,alpha}`, the value of `H_k` at all-ones masses.
pub fn c_k_constant(k: u32, table: &CmAlphaTable) -> Result<Integer> {
    if k == 0 || k > table.k() {
        return Err(Error::invalid("k", format!("{k} outside 1..={}", table.k())));
    }
    Ok((1..=k)
        .map(|alpha| Integer::from(Integer::binomial_u(k, alpha)) * table.get(k, alpha))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momentpoly::{eval_h, MuVector};
    use crate::solver::{construct_pair, ConstructOptions};

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn span_norm_examples() {
        let gens = vec![
            IndependentSum::unit_sum(&[r(1, 2)]).unwrap(),
            IndependentSum::unit_sum(&[r(1, 3)]).unwrap(),
        ];
        let span = FiniteSpan::new(4, gens).unwrap();
        let ones = [Rational::from(1), Rational::from(1)];
        assert_eq!(span_norm(&span, &ones, 4).unwrap(), r(11, 6));
        let zeros = [Rational::new(), Rational::new()];
        assert_eq!(span_norm(&span, &zeros, 4).unwrap(), 0);
        assert!(span_norm(&span, &ones, 6).is_err());
        assert!(span_norm(&span, &ones[..1], 4).is_err());
        let single = FiniteSpan::new(4, vec![IndependentSum::unit_sum(&[r(2, 5)]).unwrap()]).unwrap();
        assert_eq!(span_norm(&single, &[Rational::from(1)], 2).unwrap(), r(2, 5));
    }

    #[test]
    fn c_k_values() {
        let table = CmAlphaTable::new(3).unwrap();
        assert_eq!(c_k_constant(1, &table).unwrap(), 1);
        assert_eq!(c_k_constant(2, &table).unwrap(), 8);
        let ones = MuVector::new(vec![Rational::from(1); 3]).unwrap();
        let h3 = eval_h(3, &ones, &table).unwrap();
        assert_eq!(Rational::from(c_k_constant(3, &table).unwrap()), h3);
    }

    #[test]
    fn isometry_on_small_certificate() {
        let cert = construct_pair(&ConstructOptions::new(4, 4)).unwrap();
        let report = isometry_check(&cert, 10, 1).unwrap();
        assert!(report.within_bound());
        assert!(report.propagation_bound < Float::with_val(64, 1e-60));
    }
}
