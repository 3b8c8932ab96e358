//! Builds a certificate, round-trips it through JSON, and runs every check.

use lp_isoforge::certificate::ConstructionCertificate;
use lp_isoforge::cli::verify_certificate;
use lp_isoforge::solver::{construct_pair, ConstructOptions};

fn main() -> lp_isoforge::Result<()> {
    let cert = construct_pair(&ConstructOptions::new(6, 10))?;
    let text = cert.to_json_string()?;
    let parsed = ConstructionCertificate::from_json_str(&text)?;
    println!("round trip identical: {}", parsed.to_json_string()? == text);

    for c in verify_certificate(&parsed, 50, 7)? {
        println!("{:?} {}: {}", c.status, c.name, c.detail);
    }

    // shift one nu_j above its bracket
    let mut broken = parsed.clone();
    let e = &mut broken.entries[3];
    e.nu = broken.ball.delta_at(e.j, broken.p) * rug::Rational::from(2);
    for v in broken.bracket_violations() {
        println!("injected fault detected: {v}");
    }
    Ok(())
}
