//! The explicit p = 4 pair and the fourth-moment coefficient discrepancy.

use lp_isoforge::p4::{build_p4_table, discrepancy_report, table_text};
use lp_isoforge::scalar::Precision;

fn main() -> lp_isoforge::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let rows = build_p4_table(n, Precision::default())?;
    print!("{}", table_text(&rows));
    println!();
    print!("{}", discrepancy_report(&rows));
    Ok(())
}
