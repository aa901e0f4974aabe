//! Closed-form settling-time bounds against simulated comparison equations.

use outstab::certify::{finite_time_bound, fixed_time_bound, set_attraction_bound};
use outstab::dynamics::comparison_system;
use outstab::sim::{simulate_settling, IntegratorConfig};

fn main() -> outstab::Result<()> {
    let ft = comparison_system(&[(1.0, 0.5)])?;
    let cfg = IntegratorConfig::new(1e-4, 3.0)?;
    let est = simulate_settling(&ft, &[1.0], &cfg, 1e-12, 0.1)?;
    println!("dV/dt = -V^0.5, V0 = 1: settles at {:?}, bound {}", est.t_settle, finite_time_bound(1.0, 1.0, 0.5)?);

    let fx = comparison_system(&[(1.0, 0.5), (1.0, 2.0)])?;
    let cfg = IntegratorConfig::new(1e-6, 3.5)?.with_record_every(100);
    let bound = fixed_time_bound(1.0, 0.5, 1.0, 2.0)?;
    for v0 in [1.0, 1e3, 1e6] {
        let est = simulate_settling(&fx, &[v0], &cfg, 1e-12, 0.1)?;
        println!("dV/dt = -V^0.5 - V^2, V0 = {v0:e}: settles at {:?}, bound {bound}", est.t_settle);
    }
    println!("dV/dt = -V^2 reaches V = 1 from any V0 before {}", set_attraction_bound(1.0, 2.0, 1.0)?);
    Ok(())
}
