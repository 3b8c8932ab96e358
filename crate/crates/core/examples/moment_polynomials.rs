//! The polynomials H_m and F_m^(j), their Jacobian, and the Vandermonde reduction.

use lp_isoforge::momentpoly::{eval_f_all, jacobian_f, vandermonde_check, CmAlphaTable, HValues, MuVector};
use rug::{Float, Rational};

fn main() -> lp_isoforge::Result<()> {
    let table = CmAlphaTable::new(3)?;
    for m in 1..=3 {
        let row: Vec<String> = (1..=m).map(|a| table.get(m, a).to_string()).collect();
        println!("C_{{{m},alpha}}: {}", row.join(" "));
    }

    let mu = MuVector::strictly_decreasing(vec![
        Rational::from((3, 4)),
        Rational::from((1, 2)),
        Rational::from((1, 4)),
    ])?;
    let h = HValues::at(&mu, &table)?;
    println!("H(mu) = {:?}", h.values().iter().map(|x| x.to_string()).collect::<Vec<_>>());
    let nu = Rational::from((1, 100));
    let f = eval_f_all(2, &mu, &nu, &table)?;
    println!("F^(2)(mu, 1/100) = {:?}", f.iter().map(|x| x.to_string()).collect::<Vec<_>>());

    let jac = jacobian_f(2, &mu, &nu, &table)?;
    for row in &jac.matrix {
        println!("  dF/dmu row: {:?}", row.iter().map(|x| x.to_string()).collect::<Vec<_>>());
    }
    println!("  dF/dnu: {:?}", jac.nu_column.iter().map(|x| x.to_string()).collect::<Vec<_>>());

    let mu_f = MuVector::new(mu.values().iter().map(|x| Float::with_val(256, x)).collect())?;
    let v = vandermonde_check(&mu_f, &table)?;
    println!("det J(mu, 0) / Vandermonde = {:.30}", v.ratio.to_f64());
    Ok(())
}
