//! Solving the moment-matching system `F^{(j)}(mu, nu_j) = H(mu_bar)`.
//!
//! For each `j`, `nu_j` is pinned inside `(delta/2 j^{2-p}, delta j^{2-p})` and
//! the `k` equations are solved for the `k` masses by damped Newton iteration
//! with exact Jacobians. The admissible region comes from [`ball_params`].

use std::cmp::Ordering;

use rug::{Float, Integer, Rational};

use crate::certificate::{CertificateEntry, ConstructionCertificate};
use crate::error::{Error, Result};
use crate::linalg::{det_is_nonzero, determinant, solve};
use crate::momentpoly::{
    elem_sym_all, eval_f_all, grad_h_from_elem, jacobian_f, CmAlphaTable, HValues, MuVector,
};
use crate::scalar::{pow2, rational_round_up, Precision, Scalar};

/// Iteration limits for [`solve_mu`].
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iters: u32,
    pub max_halvings: u32,
    /// Maximum number of precision doublings when the Jacobian is near singular.
    pub max_escalations: u32,
    /// Iterates are clipped to the sup-norm ball `(center, radius)` when set.
    pub region: Option<(Vec<Rational>, Rational)>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iters: 200,
            max_halvings: 40,
            max_escalations: 2,
            region: None,
        }
    }
}

/// Result of [`solve_mu`].
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub mu: MuVector<Float>,
    /// `F_m(mu, nu) - target_m` at the working precision.
    pub residuals: Vec<Float>,
    pub iters: u32,
    pub precision_bits: u32,
}

impl SolveOutcome {
    pub fn max_residual(&self) -> Float {
        max_abs(&self.residuals)
    }
}

fn max_abs(v: &[Float]) -> Float {
    v.iter()
        .map(|x| Float::with_val(x.prec(), x.abs_ref()))
        .max_by(|a, b| a.total_cmp(b))
        .expect("non-empty")
}

/// `mu_bar_i = (k + 1 - i) / (k + 1)`.
pub fn default_base_point(k: u32) -> Result<MuVector<Rational>> {
    if k < 2 {
        return Err(Error::invalid("k", format!("{k} < 2")));
    }
    MuVector::strictly_decreasing(
        (1..=k)
            .map(|i| Rational::from((k + 1 - i, k + 1)))
            .collect(),
    )
}

/// Radii of the admissible neighbourhood of `(mu_bar, 0)`.
///
/// All quantities are exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct BallParams {
    pub mu_bar: MuVector<Rational>,
    pub eps_bar: Rational,
    pub eps: Rational,
    /// Supremum of `C(2m, 2l) |dH_{m-l}/dmu_beta|` over the `eps_bar`-ball.
    pub m_sup: Rational,
    pub eps0: Rational,
    pub delta: Rational,
}

impl BallParams {
    pub fn k(&self) -> u32 {
        self.mu_bar.k()
    }

    /// `delta * j^{2-p}`.
    pub fn delta_at(&self, j: u64, p: u32) -> Rational {
        Rational::from(&self.delta / Integer::from(Integer::u_pow_u(j as u32, p - 2)))
    }
}

/// Derives `eps_bar`, `M`, `eps0` and `delta` for a strictly decreasing base point.
///
/// `eps_bar` is three quarters of half the smallest of the gaps and `mu_bar_k`.
/// `M` is attained at a corner of the ball because every partial derivative
/// of `H` has nonnegative coefficients; all corners and the center are scanned.
pub fn ball_params(mu_bar: &MuVector<Rational>, p: u32) -> Result<BallParams> {
    let k = mu_bar.k();
    if p != 2 * k {
        return Err(Error::invalid("p", format!("p = {p} but the base point has k = {k}")));
    }
    if k < 2 {
        return Err(Error::invalid("k", "the neighbourhood radius needs k >= 2"));
    }
    if !mu_bar.is_strictly_decreasing() {
        return Err(Error::Degenerate("base point must be strictly decreasing".into()));
    }
    let vals = mu_bar.values();
    let min_gap = vals
        .windows(2)
        .map(|w| Rational::from(&w[0] - &w[1]))
        .chain(std::iter::once(vals[k as usize - 1].clone()))
        .min()
        .expect("k >= 2");
    if min_gap.cmp0() != Ordering::Greater {
        return Err(Error::Degenerate("zero gap in base point".into()));
    }
    let eps_bar = &min_gap * Rational::from((3, 8));
    let table = CmAlphaTable::new(k)?;

    let mut points: Vec<Vec<Rational>> = vec![vals.to_vec()];
    for corner in 0u64..(1 << k) {
        points.push(
            vals.iter()
                .enumerate()
                .map(|(i, v)| {
                    if corner >> i & 1 == 1 {
                        Rational::from(v + &eps_bar)
                    } else {
                        Rational::from(v - &eps_bar)
                    }
                })
                .collect(),
        );
    }
    let mut m_sup = Rational::new();
    for point in &points {
        let e = elem_sym_all(point);
        for m in 1..=k {
            for l in 1..=m {
                let b = Integer::from(Integer::binomial_u(2 * m, 2 * l));
                for mu_beta in point {
                    let g = grad_h_from_elem(m - l, &e, mu_beta, &table);
                    let cand = g.abs() * &b;
                    if cand > m_sup {
                        m_sup = cand;
                    }
                }
            }
        }
    }
    let eps = eps_bar.clone();
    let eps0 = &eps / Rational::from(&m_sup * (k - 1));
    let alt = Rational::from(&vals[k as usize - 1] - &eps0);
    let delta = if eps0 < alt { eps0.clone() } else { alt };
    if delta.cmp0() != Ordering::Greater {
        return Err(Error::Degenerate("delta is not positive".into()));
    }
    Ok(BallParams {
        mu_bar: mu_bar.clone(),
        eps_bar,
        eps,
        m_sup,
        eps0,
        delta,
    })
}

fn to_float_vec(v: &[Rational], prec: u32) -> Vec<Float> {
    v.iter().map(|x| Float::with_val(prec, x)).collect()
}

fn residual_vector(
    j: u64,
    mu: &MuVector<Float>,
    nu: &Float,
    target: &[Float],
    table: &CmAlphaTable,
) -> Result<Vec<Float>> {
    Ok(eval_f_all(j, mu, nu, table)?
        .iter()
        .zip(target)
        .map(|(f, t)| f.sub_ref(t))
        .collect())
}

fn inside_region(values: &[Float], region: &Option<(Vec<Float>, Float)>) -> bool {
    let in_unit = values.iter().all(|v| {
        v.cmp0() == Some(Ordering::Greater) && *v < 1u32
    });
    match region {
        None => in_unit,
        Some((center, radius)) => {
            in_unit
                && values
                    .iter()
                    .zip(center)
                    .all(|(v, c)| Float::with_val(v.prec(), v - c).abs() <= *radius)
        }
    }
}

/// Damped Newton iteration on `G(mu) = F^{(j)}(mu, nu) - target`.
///
/// Stops once the residual reaches the rounding floor of the working
/// precision, and succeeds if it is below `2^-(prec/2)` by then. Steps are
/// halved until the residual decreases and the iterate stays in the region.
pub fn solve_mu(
    j: u64,
    nu: &Rational,
    target: &HValues<Rational>,
    init: &MuVector<Float>,
    table: &CmAlphaTable,
    precision: Precision,
    opts: &NewtonOptions,
) -> Result<SolveOutcome> {
    let mut prec = precision;
    let mut escalations = 0;
    loop {
        match solve_at(j, nu, target, init, table, prec, opts) {
            Err(Error::Singular { .. }) if escalations < opts.max_escalations => {
                escalations += 1;
                prec = prec.doubled();
            }
            other => return other,
        }
    }
}

fn solve_at(
    j: u64,
    nu: &Rational,
    target: &HValues<Rational>,
    init: &MuVector<Float>,
    table: &CmAlphaTable,
    precision: Precision,
    opts: &NewtonOptions,
) -> Result<SolveOutcome> {
    let prec = precision.bits();
    let nu_f = Float::with_val(prec, nu);
    let target_f = to_float_vec(target.values(), prec);
    let region = opts
        .region
        .as_ref()
        .map(|(c, r)| (to_float_vec(c, prec), Float::with_val(prec, r)));
    let mut mu = MuVector::new(init.values().iter().map(|v| v.at_precision(prec)).collect())?;
    if mu.len() != target.values().len() {
        return Err(Error::DimensionMismatch {
            expected: target.values().len(),
            got: mu.len(),
        });
    }
    let scale = target_f
        .iter()
        .fold(Float::with_val(prec, 1), |acc, t| acc.max(&Float::with_val(prec, t.abs_ref())));
    let floor = scale * pow2(prec, -(prec as i32 - 16));
    let accept = precision.half_tolerance();

    let mut g = residual_vector(j, &mu, &nu_f, &target_f, table)?;
    let mut norm = max_abs(&g);
    for iter in 0..opts.max_iters {
        if norm <= floor {
            return Ok(SolveOutcome { mu, residuals: g, iters: iter, precision_bits: prec });
        }
        let jac = jacobian_f(j, &mu, &nu_f, table)?;
        let det = determinant(&jac.matrix)?;
        if !det_is_nonzero(&det, &jac.matrix) {
            return Err(Error::Singular { precision: prec });
        }
        let rhs: Vec<Float> = g.iter().map(|x| x.neg_ref()).collect();
        let step = solve(&jac.matrix, &rhs)?;

        let mut lambda = Float::with_val(prec, 1);
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<Float> = mu
                .values()
                .iter()
                .zip(&step)
                .map(|(m, s)| Float::with_val(prec, m + Float::with_val(prec, s * &lambda)))
                .collect();
            if inside_region(&cand, &region) {
                let cand_mu = MuVector::new(cand)?;
                let cand_g = residual_vector(j, &cand_mu, &nu_f, &target_f, table)?;
                let cand_norm = max_abs(&cand_g);
                if cand_norm < norm {
                    accepted = Some((cand_mu, cand_g, cand_norm));
                    break;
                }
            }
            lambda /= 2u32;
        }
        match accepted {
            Some((m, gg, nn)) => {
                mu = m;
                g = gg;
                norm = nn;
            }
            // no further decrease is possible at this precision
            None if norm < accept => {
                return Ok(SolveOutcome { mu, residuals: g, iters: iter, precision_bits: prec });
            }
            None => {
                return Err(Error::ContinuationFailure {
                    j,
                    reason: format!("no descent step after {} halvings, residual {}", opts.max_halvings, norm.to_f64()),
                })
            }
        }
    }
    if norm < accept {
        return Ok(SolveOutcome { mu, residuals: g, iters: opts.max_iters, precision_bits: prec });
    }
    Err(Error::ContinuationFailure {
        j,
        reason: format!("no convergence in {} iterations, residual {}", opts.max_iters, norm.to_f64()),
    })
}

/// Direct solution of the `k = 2` system.
///
/// `F_1 = s + nu j^2` and `F_2 = s + 6q + nu (6 j^2 s + j^4)` with
/// `s = mu_1 + mu_2`, `q = mu_1 mu_2`, so the masses are the roots of
/// `x^2 - s x + q`.
pub fn closed_form_k2(j: u64, nu: &Float, target: &HValues<Float>) -> Result<MuVector<Float>> {
    if target.values().len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: target.values().len() });
    }
    let prec = nu.prec().max(target.values()[0].prec());
    let jj = Float::with_val(prec, j) * Float::with_val(prec, j);
    let s = Float::with_val(prec, target.get(1) - Float::with_val(prec, nu * &jj));
    let inner = Float::with_val(prec, &jj * &s) * 6u32 + Float::with_val(prec, &jj * &jj);
    let q = (Float::with_val(prec, target.get(2) - &s) - Float::with_val(prec, nu * &inner)) / 6u32;
    let disc = Float::with_val(prec, &s * &s) - Float::with_val(prec, &q * 4u32);
    if disc.cmp0() != Some(Ordering::Greater) {
        return Err(Error::NoSolution(format!("discriminant {} is not positive", disc.to_f64())));
    }
    let root = disc.sqrt();
    let hi = Float::with_val(prec, &s + &root) / 2u32;
    let lo = Float::with_val(prec, &s - &root) / 2u32;
    let valid = |x: &Float| x.cmp0() == Some(Ordering::Greater) && *x < 1u32;
    if !valid(&hi) || !valid(&lo) {
        return Err(Error::NoSolution(format!("roots {} and {} leave (0, 1)", hi.to_f64(), lo.to_f64())));
    }
    MuVector::strictly_decreasing(vec![hi, lo])
}

/// Settings for [`construct_pair`].
#[derive(Debug, Clone)]
pub struct ConstructOptions {
    pub p: u32,
    pub j_max: u64,
    pub precision: Precision,
    /// `nu_j = nu_fraction * delta * j^{2-p}`; must lie strictly between 1/2 and 1.
    pub nu_fraction: Rational,
    pub seed: Option<u64>,
    /// Base point; [`default_base_point`] when `None`.
    pub mu_bar: Option<MuVector<Rational>>,
}

impl ConstructOptions {
    pub fn new(p: u32, j_max: u64) -> Self {
        ConstructOptions {
            p,
            j_max,
            precision: Precision::default(),
            nu_fraction: Rational::from((3, 4)),
            seed: None,
            mu_bar: None,
        }
    }
}

/// Number of geometric continuation steps in `nu` when a direct solve fails.
pub const CONTINUATION_STEPS: u32 = 16;

/// Solves every `j <= j_max` and assembles the certificate.
///
/// Iterates are first confined to the `eps_bar`-ball around `mu_bar`, with a
/// direct solve and then continuation in `nu`. If both fail, continuation is
/// repeated with masses only confined to `(0, 1)` and the entry is marked as
/// lying outside the ball. A `j` that fails every attempt is recorded in
/// `failed_j`; the certificate is then partial.
pub fn construct_pair(opts: &ConstructOptions) -> Result<ConstructionCertificate> {
    let p = opts.p;
    if p < 4 || p % 2 == 1 {
        return Err(Error::invalid("p", format!("{p} is not an even integer >= 4")));
    }
    if opts.j_max == 0 {
        return Err(Error::invalid("j_max", "must be at least 1"));
    }
    let half = Rational::from((1, 2));
    if opts.nu_fraction <= half || opts.nu_fraction >= 1 {
        return Err(Error::invalid("nu_fraction", format!("{} is outside (1/2, 1)", opts.nu_fraction)));
    }
    let k = p / 2;
    let mu_bar = match &opts.mu_bar {
        Some(m) => m.clone(),
        None => default_base_point(k)?,
    };
    let ball = ball_params(&mu_bar, p)?;
    let table = CmAlphaTable::new(k)?;
    let target = HValues::at(&mu_bar, &table)?;
    let prec = opts.precision.bits();
    let init = MuVector::new(to_float_vec(mu_bar.values(), prec))?;
    let newton = NewtonOptions {
        region: Some((mu_bar.values().to_vec(), ball.eps_bar.clone())),
        ..NewtonOptions::default()
    };
    let unclipped = NewtonOptions::default();

    let mut entries = Vec::new();
    let mut failed_j = Vec::new();
    for j in 1..=opts.j_max {
        let nu = &opts.nu_fraction * ball.delta_at(j, p);
        let in_ball = solve_mu(j, &nu, &target, &init, &table, opts.precision, &newton)
            .or_else(|_| continuation(j, &nu, &target, &init, &table, opts.precision, &newton));
        let solved = match in_ball {
            Ok(outcome) => Ok((outcome, true)),
            // the solution may exist outside the eps_bar-ball; masses stay in (0, 1)
            Err(_) => continuation(j, &nu, &target, &init, &table, opts.precision, &unclipped)
                .map(|outcome| (outcome, false)),
        };
        match solved {
            Ok((outcome, inside)) => {
                entries.push(certify_entry(j, nu, outcome, inside, &target, &table)?)
            }
            Err(_) => failed_j.push(j),
        }
    }
    Ok(ConstructionCertificate {
        p,
        k,
        precision_bits: prec,
        nu_fraction: opts.nu_fraction.clone(),
        seed: opts.seed,
        ball,
        target,
        entries,
        failed_j,
    })
}

/// Walks `nu` up geometrically from `nu / 2^15` to `nu`, warm-starting each solve.
fn continuation(
    j: u64,
    nu: &Rational,
    target: &HValues<Rational>,
    init: &MuVector<Float>,
    table: &CmAlphaTable,
    precision: Precision,
    opts: &NewtonOptions,
) -> Result<SolveOutcome> {
    let mut current = init.clone();
    let mut last = None;
    for t in 1..=CONTINUATION_STEPS {
        let shrink = Integer::from(1) << (CONTINUATION_STEPS - t);
        let nu_t = Rational::from(nu / shrink);
        let outcome = solve_mu(j, &nu_t, target, &current, table, precision, opts)?;
        current = outcome.mu.clone();
        last = Some(outcome);
    }
    last.ok_or_else(|| Error::ContinuationFailure { j, reason: "no continuation steps".into() })
}

/// Exact `max_m |F_m(mu, nu) - H_m(mu_bar)|` on the stored binary values.
pub fn exact_residual(
    j: u64,
    mu: &MuVector<Float>,
    nu: &Rational,
    target: &HValues<Rational>,
    table: &CmAlphaTable,
) -> Result<Rational> {
    let exact_mu = MuVector::new(
        mu.values()
            .iter()
            .map(crate::scalar::real_to_rational)
            .collect::<Result<Vec<_>>>()?,
    )?;
    let f = eval_f_all(j, &exact_mu, nu, table)?;
    Ok(f.iter()
        .zip(target.values())
        .map(|(a, b)| Rational::from(a - b).abs())
        .max()
        .expect("k >= 1"))
}

fn certify_entry(
    j: u64,
    nu: Rational,
    outcome: SolveOutcome,
    in_eps_ball: bool,
    target: &HValues<Rational>,
    table: &CmAlphaTable,
) -> Result<CertificateEntry> {
    let prec = outcome.precision_bits;
    let exact = exact_residual(j, &outcome.mu, &nu, target, table)?;
    let nu_f = Float::with_val(prec, &nu);
    let jac = jacobian_f(j, &outcome.mu, &nu_f, table)?;
    let jac_det = determinant(&jac.matrix)?;
    Ok(CertificateEntry {
        j,
        nu,
        mu: outcome.mu.values().to_vec(),
        residuals: outcome.residuals,
        exact_residual_bound: rational_round_up(&exact, prec),
        jac_det,
        newton_iters: outcome.iters,
        precision_bits: prec,
        in_eps_ball,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn base_points() {
        let m = default_base_point(2).unwrap();
        assert_eq!(m.values(), &[q(2, 3), q(1, 3)]);
        let m = default_base_point(3).unwrap();
        assert_eq!(m.values(), &[q(3, 4), q(1, 2), q(1, 4)]);
        for k in 2..8 {
            let m = default_base_point(k).unwrap();
            assert!(m.is_strictly_decreasing());
            assert!(m.values()[0] < 1);
        }
        assert!(default_base_point(1).is_err());
    }

    #[test]
    fn ball_for_k2() {
        let mu_bar = default_base_point(2).unwrap();
        let ball = ball_params(&mu_bar, 4).unwrap();
        assert_eq!(ball.eps_bar, q(1, 8));
        assert_eq!(ball.eps, ball.eps_bar);
        assert!(ball.m_sup >= Integer::from(Integer::binomial_u(4, 2)));
        assert!(ball.delta.cmp0() == Ordering::Greater);
        // the sup is C(4,2) * dH_1 = 6, or C(4,2)... every term is 6 * 1 at k = 2
        assert_eq!(ball.m_sup, 6);
        assert_eq!(ball.eps0, q(1, 48));
        assert_eq!(ball.delta, q(1, 48));
        assert!(ball_params(&mu_bar, 6).is_err());
    }

    #[test]
    fn m_sup_lower_bound_holds_for_larger_k() {
        for k in 2..6 {
            let ball = ball_params(&default_base_point(k).unwrap(), 2 * k).unwrap();
            assert!(ball.m_sup >= Integer::from(Integer::binomial_u(2 * k, 2)));
            assert!(ball.delta.cmp0() == Ordering::Greater);
        }
    }

    #[test]
    fn zero_nu_returns_the_base_point() {
        let mu_bar = default_base_point(3).unwrap();
        let table = CmAlphaTable::new(3).unwrap();
        let target = HValues::at(&mu_bar, &table).unwrap();
        let init = MuVector::new(to_float_vec(mu_bar.values(), 256)).unwrap();
        let out = solve_mu(4, &q(0, 1), &target, &init, &table, Precision::default(), &NewtonOptions::default()).unwrap();
        assert_eq!(out.iters, 0);
        assert!(out.max_residual().is_zero());
        assert_eq!(out.mu, init);
    }

    #[test]
    fn closed_form_example_digits() {
        let target = HValues(vec![Float::with_val(256, 1), Float::with_val(256, 7) / 3u32]);
        let nu = Float::with_val(256, 1) / 100u32;
        let mu = closed_form_k2(1, &nu, &target).unwrap();
        assert!((mu.values()[0].to_f64() - 0.675839).abs() < 1e-6);
        assert!((mu.values()[1].to_f64() - 0.314161).abs() < 1e-6);
    }

    #[test]
    fn closed_form_recovers_base_point_at_zero_nu() {
        let target = HValues(vec![Float::with_val(256, 1), Float::with_val(256, 7) / 3u32]);
        let mu = closed_form_k2(3, &Float::with_val(256, 0), &target).unwrap();
        let two_thirds = Float::with_val(256, 2) / 3u32;
        assert!(Float::with_val(256, &mu.values()[0] - &two_thirds).abs() < pow2(256, -250));
    }

    #[test]
    fn closed_form_rejects_impossible_targets() {
        let target = HValues(vec![Float::with_val(256, 1), Float::with_val(256, 1)]);
        assert!(closed_form_k2(1, &Float::with_val(256, 0.5), &target).is_err());
    }

    #[test]
    fn newton_matches_closed_form_at_j1() {
        let mu_bar = default_base_point(2).unwrap();
        let table = CmAlphaTable::new(2).unwrap();
        let target = HValues::at(&mu_bar, &table).unwrap();
        let init = MuVector::new(to_float_vec(mu_bar.values(), 256)).unwrap();
        let nu = q(1, 100);
        let out = solve_mu(1, &nu, &target, &init, &table, Precision::default(), &NewtonOptions::default()).unwrap();
        let target_f = HValues(to_float_vec(target.values(), 256));
        let closed = closed_form_k2(1, &Float::with_val(256, &nu), &target_f).unwrap();
        for (a, b) in out.mu.values().iter().zip(closed.values()) {
            assert!(Float::with_val(256, a - b).abs() < pow2(256, -128));
        }
        assert!(out.max_residual() < pow2(256, -128));
    }

    #[test]
    fn construct_rejects_bad_settings() {
        assert!(construct_pair(&ConstructOptions::new(5, 3)).is_err());
        assert!(construct_pair(&ConstructOptions::new(2, 3)).is_err());
        assert!(construct_pair(&ConstructOptions::new(6, 0)).is_err());
        let mut o = ConstructOptions::new(6, 3);
        o.nu_fraction = q(1, 2);
        assert!(construct_pair(&o).is_err());
    }

    #[test]
    fn small_construction_is_valid() {
        let cert = construct_pair(&ConstructOptions::new(6, 4)).unwrap();
        assert!(cert.is_complete());
        assert_eq!(cert.entries.len(), 4);
        assert!(cert.validate().is_empty(), "{:?}", cert.validate());
    }
}
