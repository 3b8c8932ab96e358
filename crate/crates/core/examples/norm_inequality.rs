//! The constant C_k and the inequality ||h||_p ||h||_q <= C_k^{1/p} ||h||_2^2.

use lp_isoforge::analysis::{c_k_constant, vpl_check};
use lp_isoforge::momentpoly::CmAlphaTable;
use lp_isoforge::solver::default_base_point;

fn main() -> lp_isoforge::Result<()> {
    let table = CmAlphaTable::new(6)?;
    for k in 2..=6 {
        let mu = default_base_point(k)?;
        let v = vpl_check(k, &mu, 256)?;
        println!(
            "k = {k}: C_k = {:>8}  lhs = {:.8}  rhs = {:.8}  holds: {}",
            c_k_constant(k, &table)?,
            v.lhs.to_f64(),
            v.rhs.to_f64(),
            v.holds
        );
    }
    Ok(())
}
