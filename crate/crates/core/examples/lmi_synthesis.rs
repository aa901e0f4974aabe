//! Synthesizes implicit-Lyapunov-function gains for the double integrator and checks them.

use nalgebra::DMatrix;
use outstab::ilf::{chain_weights, synthesize_lmi, verify_lmi};

fn main() -> outstab::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let (r1, r2) = chain_weights(2, -0.5, 0.5);
    let params = synthesize_lmi(&a, &b, -0.5, 0.5, &r1, &r2, 7)?;
    println!("X = {}", params.x());
    println!("k = {}", params.gain());
    println!("zeta = {:?}", params.zeta());
    println!("margins = {:?}", verify_lmi(&a, &b, &params)?);
    println!("{}", params.to_json());
    Ok(())
}
