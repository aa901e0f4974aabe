//! Fixed-time certificate of the second example system with its settling-time bound.

use outstab::certify::{default_samples, example2_certificate, find_rate_thresholds, THRESHOLD_CAP};

fn main() -> outstab::Result<()> {
    let cert = example2_certificate()?;
    let report = cert.check(&default_samples(2, 10_000)?)?;
    println!("verdict {:?}, {} violations", report.verdict, report.total_violations());
    let (u1, u2) = find_rate_thresholds(&cert.rates, THRESHOLD_CAP)?;
    println!("rate thresholds U_tau1 = {u1:.6}, U_tau2 = {u2:.6}");
    for b in &report.bounds {
        println!("{:<22} {:.6}", b.name, b.value);
    }
    Ok(())
}
