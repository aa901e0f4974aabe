//! Sample-based audit of the output finite-time certificate of the first example system.

use std::sync::Arc;

use outstab::certify::{default_samples, example1_certificate, RateParams, DEFAULT_SAMPLE_COUNT};

fn main() -> outstab::Result<()> {
    let samples = default_samples(2, DEFAULT_SAMPLE_COUNT)?;
    let cert = example1_certificate()?;
    let report = cert.check(&samples)?;
    for c in &report.conditions {
        println!("{:<24} worst margin {:>11.3e}  violations {}", c.name, c.worst_margin, c.violations);
    }
    println!("verdict {:?} on {} samples", report.verdict, report.samples_used);

    // a rate exponent the dynamics cannot deliver for U > 1
    let mut bad = cert.clone();
    let v = cert.candidate.clone();
    bad.rates = RateParams::ofts(1.5, 0.9, vec![1.0], vec![1.0])?
        .with_sample_dependent_b(Arc::new(move |x: &[f64]| vec![2.0 * v.v(x)]));
    let r = bad.check(&samples)?;
    println!("alpha = 0.9: verdict {:?}, first violation {:?}", r.verdict, r.first_violation);
    Ok(())
}
