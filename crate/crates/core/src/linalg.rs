//! Dense Gaussian elimination over any [`Scalar`].

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{pow2, Scalar};

/// Index of the entry of largest magnitude in `col` among rows `from..`.
fn pivot_row<T: Scalar>(a: &[Vec<T>], col: usize, from: usize) -> usize {
    (from..a.len())
        .max_by(|&x, &y| a[x][col].abs_ref().cmp_value(&a[y][col].abs_ref()))
        .expect("non-empty range")
}

fn check_square<T>(a: &[Vec<T>]) -> Result<usize> {
    let n = a.len();
    if n == 0 {
        return Err(Error::invalid("matrix", "empty"));
    }
    for row in a {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
    }
    Ok(n)
}

/// Determinant by partial-pivoting elimination; exact over rationals.
pub fn determinant<T: Scalar>(a: &[Vec<T>]) -> Result<T> {
    let n = check_square(a)?;
    let mut m = a.to_vec();
    let mut det = m[0][0].one_like();
    for col in 0..n {
        let p = pivot_row(&m, col, col);
        if m[p][col].is_zero() {
            return Ok(det.zero_like());
        }
        if p != col {
            m.swap(p, col);
            det = det.neg_ref();
        }
        det = det.mul_ref(&m[col][col]);
        for r in col + 1..n {
            let (top, bottom) = m.split_at_mut(r);
            let (pivot, row) = (&top[col], &mut bottom[0]);
            let factor = row[col].div_ref(&pivot[col]);
            for (x, y) in row[col..n].iter_mut().zip(&pivot[col..n]) {
                *x = x.sub_ref(&factor.mul_ref(y));
            }
        }
    }
    Ok(det)
}

/// Solves `a x = b`.
pub fn solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>> {
    let n = check_square(a)?;
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for col in 0..n {
        let p = pivot_row(&m, col, col);
        if m[p][col].is_zero() {
            return Err(Error::Singular {
                precision: m[0][0].precision_bits().unwrap_or(0),
            });
        }
        m.swap(p, col);
        for r in col + 1..n {
            let (top, bottom) = m.split_at_mut(r);
            let (pivot, row) = (&top[col], &mut bottom[0]);
            let factor = row[col].div_ref(&pivot[col]);
            for (x, y) in row[col..n + 1].iter_mut().zip(&pivot[col..n + 1]) {
                *x = x.sub_ref(&factor.mul_ref(y));
            }
        }
    }
    let mut x: Vec<T> = vec![m[0][0].zero_like(); n];
    for r in (0..n).rev() {
        let mut acc = m[r][n].clone();
        for c in r + 1..n {
            acc = acc.sub_ref(&m[r][c].mul_ref(&x[c]));
        }
        x[r] = acc.div_ref(&m[r][r]);
    }
    Ok(x)
}

/// Largest entry magnitude.
pub fn max_abs_entry<T: Scalar>(a: &[Vec<T>]) -> T {
    a.iter()
        .flatten()
        .map(|x| x.abs_ref())
        .max_by(|x, y| x.cmp_value(y))
        .expect("non-empty matrix")
}

/// Whether `det` is distinguishable from zero for a `k x k` matrix.
///
/// Exact values only need to be nonzero. Floats must exceed
/// `2^-(prec/2) * max|a_ij|^k`.
pub fn det_is_nonzero<T: Scalar>(det: &T, a: &[Vec<T>]) -> bool {
    match det.precision_bits() {
        None => !det.is_zero(),
        Some(prec) => {
            let scale = max_abs_entry(a).pow_u(a.len() as u32).to_prec_real(prec);
            let band = scale * pow2(prec, -((prec / 2) as i32));
            det.to_prec_real(prec).abs().partial_cmp(&band) == Some(Ordering::Greater)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::{Float, Rational};

    fn r(n: i64) -> Rational {
        Rational::from(n)
    }

    #[test]
    fn exact_determinants() {
        let a = vec![vec![r(1), r(1)], vec![r(3), r(5)]];
        assert_eq!(determinant(&a).unwrap(), r(2));
        let singular = vec![vec![r(1), r(2)], vec![r(2), r(4)]];
        assert_eq!(determinant(&singular).unwrap(), r(0));
        let swap = vec![vec![r(0), r(1)], vec![r(1), r(0)]];
        assert_eq!(determinant(&swap).unwrap(), r(-1));
    }

    #[test]
    fn solves_small_systems() {
        let a = vec![vec![r(2), r(1)], vec![r(1), r(3)]];
        let x = solve(&a, &[r(3), r(5)]).unwrap();
        assert_eq!(x, vec![Rational::from((4, 5)), Rational::from((7, 5))]);
        let singular = vec![vec![r(1), r(2)], vec![r(2), r(4)]];
        assert!(solve(&singular, &[r(1), r(1)]).is_err());
    }

    #[test]
    fn guard_band_rejects_tiny_float_determinants() {
        let eps = pow2(128, -100);
        let a = vec![
            vec![Float::with_val(128, 1), Float::with_val(128, 1)],
            vec![Float::with_val(128, 1), Float::with_val(128, 1) + &eps],
        ];
        let det = determinant(&a).unwrap();
        assert!(!det_is_nonzero(&det, &a));
        let b = vec![
            vec![Float::with_val(128, 1), Float::with_val(128, 0)],
            vec![Float::with_val(128, 0), Float::with_val(128, 1)],
        ];
        assert!(det_is_nonzero(&determinant(&b).unwrap(), &b));
    }
}
