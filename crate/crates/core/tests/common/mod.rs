//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rug::ops::Pow;
use rug::{Float, Rational};

/// `E(sum_i X_i)^order` for independent `X_i` uniform on `{-a_i, a_i}` with
/// total mass `mu_i` and zero otherwise, by enumerating all `3^n` sign patterns.
pub fn brute_moment(terms: &[(Rational, Rational)], order: u32) -> Rational {
    fn walk(terms: &[(Rational, Rational)], order: u32, value: Rational, prob: Rational, acc: &mut Rational) {
        if prob.cmp0().is_eq() {
            return;
        }
        match terms.split_first() {
            None => *acc += Rational::from((&value).pow(order)) * prob,
            Some(((a, mu), rest)) => {
                let half = Rational::from(mu / 2u32);
                walk(rest, order, Rational::from(&value + a), Rational::from(&prob * &half), acc);
                walk(rest, order, Rational::from(&value - a), Rational::from(&prob * &half), acc);
                let stay = Rational::from(1u32) - mu;
                walk(rest, order, value, prob * stay, acc);
            }
        }
    }
    let mut acc = Rational::new();
    walk(terms, order, Rational::new(), Rational::from(1), &mut acc);
    acc
}

/// Atoms `(value, prob)` of a sum of unit-scale symmetric variables, in `f64`.
pub fn atoms_f64(masses: &[f64]) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 1.0)];
    for &m in masses {
        let mut next = Vec::with_capacity(out.len() * 3);
        for &(v, p) in &out {
            next.push((v + 1.0, p * m / 2.0));
            next.push((v - 1.0, p * m / 2.0));
            next.push((v, p * (1.0 - m)));
        }
        out = next;
    }
    out
}

/// A rational in `(0, 1]` with denominator at most `den`.
pub fn unit_rational(rng: &mut ChaCha8Rng, den: i64) -> Rational {
    let d = rng.gen_range(1..=den);
    let n = rng.gen_range(1..=d);
    Rational::from((n, d))
}

/// `k` distinct values in `(0, 1)`, sorted decreasing.
pub fn decreasing_masses(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    loop {
        let mut v: Vec<Rational> = (0..k)
            .map(|_| Rational::from((rng.gen_range(1..1000), 1000)))
            .collect();
        v.sort_by(|a, b| b.cmp(a));
        if v.windows(2).all(|w| w[0] > w[1]) {
            return v;
        }
    }
}

pub fn float(prec: u32, x: &Rational) -> Float {
    Float::with_val(prec, x)
}

pub fn factorial(n: u32) -> rug::Integer {
    rug::Integer::from(rug::Integer::factorial(n))
}
