//! Bracket, w_j bounds and series comparisons for a p = 6 and a p = 4 certificate.

use lp_isoforge::analysis::{uncomplemented_certificate, Divergence};
use lp_isoforge::solver::{construct_pair, ConstructOptions};

fn main() -> lp_isoforge::Result<()> {
    for (p, j_max) in [(6, 20), (4, 6)] {
        let cert = construct_pair(&ConstructOptions::new(p, j_max))?;
        let up = uncomplemented_certificate(&cert)?;
        println!("p = {p}, delta = {}", up.delta);
        for r in up.rows.iter().take(3) {
            println!(
                "  j = {}: {:.6} < w_j = {:.6} < {:.6}",
                r.j,
                r.w_lower.to_f64(),
                r.w.to_f64(),
                r.w_upper.to_f64()
            );
        }
        println!(
            "  sum nu_j <= {:.6e} + tail {:.6e}",
            up.nu_partial_sum.to_f64(),
            up.nu_tail_bound.to_f64()
        );
        match &up.divergence {
            Divergence::Certified { comparator_constant, terms, partial_sum, growth, .. } => println!(
                "  divergence certified: N = {terms}, partial sum {partial_sum:.4} > c ln N = {growth:.4} (c = {:.4})",
                comparator_constant.to_f64()
            ),
            Divergence::NotCertified { reason, .. } => println!("  {reason}"),
        }
        for note in &up.notes {
            println!("  note: {note}");
        }
    }
    Ok(())
}
