//! Solves the moment-matching system for p = 6 and writes the certificate.
//!
//! Usage: `cargo run --example construct_certificate -- [j_max] [output.json]`

use lp_isoforge::solver::{construct_pair, ConstructOptions};

fn main() -> lp_isoforge::Result<()> {
    let mut args = std::env::args().skip(1);
    let j_max: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = args.next();

    let cert = construct_pair(&ConstructOptions::new(6, j_max))?;
    println!("delta = {} (eps_bar = {}, M = {})", cert.ball.delta, cert.ball.eps_bar, cert.ball.m_sup);
    for e in &cert.entries {
        let mu: Vec<String> = e.mu.iter().map(|m| format!("{:.12}", m.to_f64())).collect();
        println!(
            "j = {:>3}  nu = {:.6e}  mu = [{}]  residual <= {:.2e}  iters = {}",
            e.j,
            e.nu.to_f64(),
            mu.join(", "),
            e.exact_residual_bound.to_f64(),
            e.newton_iters
        );
    }
    if !cert.failed_j.is_empty() {
        println!("no solution for j = {:?}", cert.failed_j);
    }
    println!("violations: {}", cert.validate().len());
    if let Some(path) = out {
        std::fs::write(&path, cert.to_json_string()?)?;
        println!("written to {path}");
    }
    Ok(())
}
