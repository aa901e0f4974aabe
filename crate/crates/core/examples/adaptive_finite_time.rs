//! Adaptive finite-time control of the double integrator with unknown θ = (3, −2).

use outstab::controllers::{adaptive_ft_loop, ft_candidate, FTControllerParams};
use outstab::dynamics::example3_plant;
use outstab::sim::{detect_settling, integrate, IntegratorConfig};

fn main() -> outstab::Result<()> {
    let theta = vec![3.0, -2.0];
    let plant = example3_plant(theta.clone())?;
    // l = s = 1 does not pass the strict Lyapunov validation, but the loop converges
    let p = FTControllerParams::without_lyapunov_check(0.5, 1.0, 1.0, 1.0)?;
    let sys = adaptive_ft_loop(&plant, p)?;
    let cfg = IntegratorConfig::new(1e-4, 20.0)?.with_record_every(10);
    let traj = integrate(&sys, &[1.0, 1.0, 0.0, 0.0], &cfg)?;
    let est = detect_settling(&traj, 1e-3, 1.0)?;
    let s = traj.final_state();
    println!("settled {} at {:?}", est.settled, est.t_settle);
    println!("final x = {:?}, ω = {:?} (θ = {theta:?})", &s[..2], &s[2..]);
    println!("candidate: start {:.4}, end {:.4}", ft_candidate(&[1.0, 1.0], &[0.0, 0.0], &theta, &p), ft_candidate(&s[..2], &s[2..], &theta, &p));
    Ok(())
}
