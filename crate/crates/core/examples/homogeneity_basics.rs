//! Weighted dilations, the homogeneous norm and a sampled homogeneity check.

use outstab::controllers::u_fts;
use outstab::homogeneity::{check_homogeneous_field, homogeneity_samples, sign_power, WeightedDilation};

fn main() -> outstab::Result<()> {
    let d = WeightedDilation::new(vec![1.5, 1.0])?;
    let x = [0.8, -0.3];
    for lam in [0.5, 1.0, 2.0] {
        let y = d.dilate(lam, &x)?;
        println!("D({lam}) x = {y:?}, ‖D(λ)x‖ = {:.6}", d.homogeneous_norm(&y)?);
    }
    let (z, r) = d.project_to_sphere(&x)?;
    println!("x = D({r:.6}) {z:?}");
    println!("⌈-2⌋^0.5 = {}", sign_power(-2.0, 0.5)?);

    // the nominal finite-time loop ẋ₁ = x₂, ẋ₂ = u_FTS(x) has degree α − 1
    let (samples, lambdas) = homogeneity_samples(2, 200, 1);
    let report = check_homogeneous_field(|x| vec![x[1], u_fts(x, 0.5)], &d, -0.5, &samples, &lambdas, 1e-9)?;
    println!("loop field homogeneous of degree -0.5: {} (max rel err {:.1e})", report.passed, report.max_relative_error);
    Ok(())
}
