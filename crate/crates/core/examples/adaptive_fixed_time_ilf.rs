//! Adaptive fixed-time control with an implicit Lyapunov function: settling
//! times barely change as the initial condition grows by two orders of magnitude.

use std::sync::Arc;

use outstab::controllers::{adaptive_fxt_loop, FxTAdaptiveParams};
use outstab::dynamics::example4_plant;
use outstab::ilf::{chain_weights, synthesize_lmi, IlfController, ILFSolveConfig};
use outstab::sim::{batch_settling, IntegratorConfig};

fn main() -> outstab::Result<()> {
    let plant = example4_plant(vec![3.0, 2.0])?;
    let (a, b) = (plant.a().clone(), nalgebra::DMatrix::from_column_slice(2, 1, plant.b().as_slice()));
    let (r1, r2) = chain_weights(2, -0.5, 0.5);
    let params = synthesize_lmi(&a, &b, -0.5, 0.5, &r1, &r2, 7)?;
    let ctl = Arc::new(IlfController::new(a, b, params, ILFSolveConfig::default())?);
    let sys = adaptive_fxt_loop(&plant, ctl, FxTAdaptiveParams::new(5.0, 1.0)?);
    let cfg = IntegratorConfig::new(1e-3, 10.0)?;
    let starts: Vec<Vec<f64>> = [1.0, 10.0, 100.0].iter().map(|k| vec![0.0, *k, 0.0, 0.0]).collect();
    for (x0, est) in starts.iter().zip(batch_settling(&sys, &starts, &cfg, 1e-2, 0.5)?) {
        println!("x0 = {:?}: settling {:?}", &x0[..2], est?.t_settle);
    }
    Ok(())
}
