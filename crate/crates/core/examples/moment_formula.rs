//! Even moments of a sum of independent symmetric three-valued variables,
//! by the composition formula and by brute-force enumeration.

use lp_isoforge::moments::{convolve, even_moment_of_sum, moment_coefficients, IndependentSum, SymmetricAtom};
use rug::Rational;

fn main() -> lp_isoforge::Result<()> {
    for (parts, coeff) in moment_coefficients(2, 2)? {
        println!("k = 2, parts {parts:?}: coefficient {coeff}");
    }

    let terms = vec![
        SymmetricAtom::unit(Rational::from((1, 2)))?,
        SymmetricAtom::unit(Rational::from((1, 3)))?,
        SymmetricAtom::new(Rational::from(2), Rational::from((1, 4)))?,
    ];
    let sum = IndependentSum::new(terms)?;
    let dist = convolve(&sum)?;
    println!("distribution has {} atoms", dist.atoms().len());
    for order in [2, 4, 6, 8] {
        let formula = even_moment_of_sum(&sum, order)?;
        let oracle = dist.raw_moment(order);
        println!("E S^{order}: formula {formula}, enumeration {oracle}, equal: {}", formula == oracle);
    }
    Ok(())
}
