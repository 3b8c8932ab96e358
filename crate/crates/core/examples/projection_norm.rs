//! The orthogonal projection onto a two-generator span and a lower bound for
//! its norm on L_4 of the product space.

use lp_isoforge::analysis::{build_projection, projection_norm_lower_bound, FiniteSpan, NormSearch, PROJECTION_ATOM_CAP};
use lp_isoforge::moments::IndependentSum;
use rug::Rational;

fn main() -> lp_isoforge::Result<()> {
    let gens = vec![
        IndependentSum::unit_sum(&[Rational::from((1, 2))])?,
        IndependentSum::unit_sum(&[Rational::from((1, 5))])?,
    ];
    let span = FiniteSpan::new(4, gens)?;
    let op = build_projection(&span, PROJECTION_ATOM_CAP)?;
    println!("atoms: {}", op.atoms());

    let f: Vec<Rational> = (0..op.atoms()).map(|i| Rational::from((i as i64 * 7 % 5 - 2, 3))).collect();
    let pf = op.apply(&f)?;
    println!("P(Pf) == Pf: {}", op.apply(&pf)? == pf);
    println!("||Pf||_2^2 = {} <= ||f||_2^2 = {}", op.norm2_sq(&pf)?, op.norm2_sq(&f)?);

    for p in [2, 4, 6] {
        let bound = projection_norm_lower_bound(&op, p, &NormSearch::default())?;
        println!("||P||_{p} >= {:.10}", bound.to_f64());
    }
    Ok(())
}
