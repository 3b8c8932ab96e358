//! The construction certificate and its JSON form (`lp-isoforge-cert/1`).
//!
//! Reals are decimal strings that parse back to the identical float at the
//! recorded precision; exact quantities are `"num/den"` strings.

use std::cmp::Ordering;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det_is_nonzero, determinant};
use crate::momentpoly::{jacobian_f, CmAlphaTable, HValues, MuVector};
use crate::scalar::{parse_rational, parse_real, real_to_string, Precision, MIN_PRECISION};
use crate::solver::{exact_residual, BallParams};

pub const SCHEMA_ID: &str = "lp-isoforge-cert/1";

/// Solved masses for one `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateEntry {
    pub j: u64,
    pub nu: Rational,
    pub mu: Vec<Float>,
    pub residuals: Vec<Float>,
    /// Upper bound on the exact `max_m |F_m - H_m(mu_bar)|` of the stored values.
    pub exact_residual_bound: Float,
    pub jac_det: Float,
    pub newton_iters: u32,
    pub precision_bits: u32,
    /// Whether the solution lies in the `eps_bar`-ball around `mu_bar`.
    pub in_eps_ball: bool,
}

impl CertificateEntry {
    pub fn mu_vector(&self) -> Result<MuVector<Float>> {
        MuVector::new(self.mu.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionCertificate {
    pub p: u32,
    pub k: u32,
    pub precision_bits: u32,
    pub nu_fraction: Rational,
    pub seed: Option<u64>,
    pub ball: BallParams,
    /// `H_m(mu_bar)`, exact.
    pub target: HValues<Rational>,
    pub entries: Vec<CertificateEntry>,
    pub failed_j: Vec<u64>,
}

/// One failed check, tied to a `j` when it concerns a single entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub j: Option<u64>,
    pub check: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.j {
            Some(j) => write!(f, "j = {j}: {} ({})", self.check, self.detail),
            None => write!(f, "{} ({})", self.check, self.detail),
        }
    }
}

impl ConstructionCertificate {
    pub fn is_complete(&self) -> bool {
        self.failed_j.is_empty()
    }

    pub fn precision(&self) -> Precision {
        Precision::new(self.precision_bits).expect("validated on construction")
    }

    /// `nu_j` must lie strictly between `delta/2 j^{2-p}` and `delta j^{2-p}`.
    pub fn bracket_violations(&self) -> Vec<Violation> {
        self.entries
            .iter()
            .filter_map(|e| {
                let upper = self.ball.delta_at(e.j, self.p);
                let lower = Rational::from(&upper / 2u32);
                if e.nu > lower && e.nu < upper {
                    None
                } else {
                    Some(Violation {
                        j: Some(e.j),
                        check: "nu bracket",
                        detail: format!("nu = {} not in ({}, {})", e.nu, lower, upper),
                    })
                }
            })
            .collect()
    }

    /// `mu_1 > ... > mu_k > delta` for every entry.
    pub fn ordering_violations(&self) -> Vec<Violation> {
        let delta = &self.ball.delta;
        self.entries
            .iter()
            .filter_map(|e| {
                let decreasing = e.mu.windows(2).all(|w| w[0] > w[1]);
                let last = e.mu.last().expect("k >= 1");
                let above = Float::with_val(e.precision_bits, delta);
                if e.mu.len() == self.k as usize && decreasing && *last > above {
                    None
                } else {
                    Some(Violation {
                        j: Some(e.j),
                        check: "mass ordering",
                        detail: format!("masses {:?} are not strictly decreasing above delta", e.mu.iter().map(|m| m.to_f64()).collect::<Vec<_>>()),
                    })
                }
            })
            .collect()
    }

    /// Re-evaluates every residual exactly and every Jacobian determinant.
    pub fn recomputation_violations(&self) -> Result<Vec<Violation>> {
        let table = CmAlphaTable::new(self.k)?;
        let mut out = Vec::new();
        for e in &self.entries {
            let mu = e.mu_vector()?;
            let prec = Precision::new(e.precision_bits)?;
            let exact = exact_residual(e.j, &mu, &e.nu, &self.target, &table)?;
            let tol = Rational::from(Integer::from(1)) / (Integer::from(1) << (prec.bits() / 2));
            if exact >= tol {
                out.push(Violation {
                    j: Some(e.j),
                    check: "residual",
                    detail: format!("exact residual {} is not below 2^-{}", exact.to_f64(), prec.bits() / 2),
                });
            }
            let bound = crate::scalar::real_to_rational(&e.exact_residual_bound)?;
            if exact > bound {
                out.push(Violation {
                    j: Some(e.j),
                    check: "residual bound",
                    detail: "stored bound is below the recomputed residual".into(),
                });
            }
            let nu_f = Float::with_val(e.precision_bits, &e.nu);
            let jac = jacobian_f(e.j, &mu, &nu_f, &table)?;
            let det = determinant(&jac.matrix)?;
            if !det_is_nonzero(&det, &jac.matrix) {
                out.push(Violation {
                    j: Some(e.j),
                    check: "jacobian",
                    detail: "determinant inside the guard band".into(),
                });
            }
        }
        Ok(out)
    }

    /// All certificate invariants; empty when the certificate is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for j in &self.failed_j {
            out.push(Violation {
                j: Some(*j),
                check: "solve",
                detail: "no solution recorded".into(),
            });
        }
        out.extend(self.bracket_violations());
        out.extend(self.ordering_violations());
        match self.recomputation_violations() {
            Ok(v) => out.extend(v),
            Err(err) => out.push(Violation {
                j: None,
                check: "recomputation",
                detail: err.to_string(),
            }),
        }
        out
    }

    pub fn max_exact_residual_bound(&self) -> Option<Float> {
        self.entries
            .iter()
            .map(|e| e.exact_residual_bound.clone())
            .max_by(|a, b| a.total_cmp(b))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_wire())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let wire: WireCertificate =
            serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_wire(wire)
    }

    fn to_wire(&self) -> WireCertificate {
        let text = |r: &Rational| r.to_string();
        WireCertificate {
            schema: SCHEMA_ID.to_string(),
            p: self.p,
            k: self.k,
            precision_bits: self.precision_bits,
            nu_fraction: text(&self.nu_fraction),
            seed: self.seed,
            complete: self.is_complete(),
            failed_j: self.failed_j.clone(),
            ball: WireBall {
                mu_bar: self.ball.mu_bar.values().iter().map(text).collect(),
                eps_bar: text(&self.ball.eps_bar),
                eps: text(&self.ball.eps),
                m_sup: text(&self.ball.m_sup),
                eps0: text(&self.ball.eps0),
                delta: text(&self.ball.delta),
            },
            target: self.target.values().iter().map(text).collect(),
            entries: self
                .entries
                .iter()
                .map(|e| WireEntry {
                    j: e.j,
                    nu: text(&e.nu),
                    mu: e.mu.iter().map(real_to_string).collect(),
                    residuals: e.residuals.iter().map(real_to_string).collect(),
                    exact_residual_bound: real_to_string(&e.exact_residual_bound),
                    jac_det: real_to_string(&e.jac_det),
                    newton_iters: e.newton_iters,
                    precision_bits: e.precision_bits,
                    in_eps_ball: e.in_eps_ball,
                })
                .collect(),
        }
    }

    fn from_wire(w: WireCertificate) -> Result<Self> {
        let schema = |msg: String| Error::Schema(msg);
        if w.schema != SCHEMA_ID {
            return Err(schema(format!("unknown schema {:?}", w.schema)));
        }
        if w.p != 2 * w.k || w.k < 2 {
            return Err(schema(format!("inconsistent p = {} and k = {}", w.p, w.k)));
        }
        if w.precision_bits < MIN_PRECISION {
            return Err(schema(format!("precision {} below {MIN_PRECISION}", w.precision_bits)));
        }
        if w.complete != w.failed_j.is_empty() {
            return Err(schema("complete flag disagrees with failed_j".into()));
        }
        let rat = |s: &str| parse_rational(s).map_err(|e| schema(e.to_string()));
        let rats = |v: &[String]| v.iter().map(|s| rat(s)).collect::<Result<Vec<_>>>();
        let k = w.k as usize;
        let mu_bar = rats(&w.ball.mu_bar)?;
        if mu_bar.len() != k || w.target.len() != k {
            return Err(schema("base point or target has the wrong length".into()));
        }
        let ball = BallParams {
            mu_bar: MuVector::new(mu_bar).map_err(|e| schema(e.to_string()))?,
            eps_bar: rat(&w.ball.eps_bar)?,
            eps: rat(&w.ball.eps)?,
            m_sup: rat(&w.ball.m_sup)?,
            eps0: rat(&w.ball.eps0)?,
            delta: rat(&w.ball.delta)?,
        };
        let mut entries = Vec::with_capacity(w.entries.len());
        for e in w.entries {
            if e.precision_bits < MIN_PRECISION {
                return Err(schema(format!("entry j = {} has precision {}", e.j, e.precision_bits)));
            }
            if e.mu.len() != k || e.residuals.len() != k {
                return Err(schema(format!("entry j = {} has the wrong length", e.j)));
            }
            let real = |s: &str| parse_real(s, e.precision_bits).map_err(|err| schema(err.to_string()));
            let reals = |v: &[String]| v.iter().map(|s| real(s)).collect::<Result<Vec<_>>>();
            entries.push(CertificateEntry {
                j: e.j,
                nu: rat(&e.nu)?,
                mu: reals(&e.mu)?,
                residuals: reals(&e.residuals)?,
                exact_residual_bound: real(&e.exact_residual_bound)?,
                jac_det: real(&e.jac_det)?,
                newton_iters: e.newton_iters,
                precision_bits: e.precision_bits,
                in_eps_ball: e.in_eps_ball,
            });
        }
        if entries.iter().any(|e| e.nu.cmp0() == Ordering::Less) {
            return Err(schema("negative nu".into()));
        }
        Ok(ConstructionCertificate {
            p: w.p,
            k: w.k,
            precision_bits: w.precision_bits,
            nu_fraction: rat(&w.nu_fraction)?,
            seed: w.seed,
            ball,
            target: HValues(rats(&w.target)?),
            entries,
            failed_j: w.failed_j,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireCertificate {
    schema: String,
    p: u32,
    k: u32,
    precision_bits: u32,
    nu_fraction: String,
    seed: Option<u64>,
    complete: bool,
    failed_j: Vec<u64>,
    ball: WireBall,
    target: Vec<String>,
    entries: Vec<WireEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBall {
    mu_bar: Vec<String>,
    eps_bar: String,
    eps: String,
    m_sup: String,
    eps0: String,
    delta: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEntry {
    j: u64,
    nu: String,
    mu: Vec<String>,
    residuals: Vec<String>,
    exact_residual_bound: String,
    jac_det: String,
    newton_iters: u32,
    precision_bits: u32,
    in_eps_ball: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{construct_pair, ConstructOptions};

    fn small() -> ConstructionCertificate {
        construct_pair(&ConstructOptions::new(4, 3)).unwrap()
    }

    #[test]
    fn json_round_trip_is_identity() {
        let cert = small();
        let text = cert.to_json_string().unwrap();
        let back = ConstructionCertificate::from_json_str(&text).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.to_json_string().unwrap(), text);
    }

    #[test]
    fn schema_errors() {
        let text = small().to_json_string().unwrap();
        assert!(matches!(
            ConstructionCertificate::from_json_str(&text[..text.len() / 2]),
            Err(Error::Schema(_))
        ));
        let renamed = text.replace(SCHEMA_ID, "lp-isoforge-cert/0");
        assert!(matches!(
            ConstructionCertificate::from_json_str(&renamed),
            Err(Error::Schema(_))
        ));
        let extra = text.replacen("\"p\":", "\"extra\": 1, \"p\":", 1);
        assert!(matches!(
            ConstructionCertificate::from_json_str(&extra),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn perturbed_nu_is_reported() {
        let mut cert = small();
        let upper = cert.ball.delta_at(2, cert.p);
        cert.entries[1].nu = upper * Rational::from((11, 10));
        let v = cert.validate();
        assert!(v.iter().any(|v| v.j == Some(2) && v.check == "nu bracket"));
        // the masses no longer solve the system at the new nu
        assert!(v.iter().any(|v| v.j == Some(2) && v.check == "residual"));
    }
}
