//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test --release --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use outstab::certify::{
    central_difference, default_samples, example1_certificate, example2_certificate, finite_time_bound,
    fixed_time_bound, set_attraction_bound, DEFAULT_SAMPLE_COUNT,
};
use outstab::controllers::{grad_v_fts, u_fts, v_fts, FTControllerParams};
use outstab::homogeneity::{check_homogeneous_field, check_homogeneous_function, homogeneity_samples, WeightedDilation};
use outstab::ilf::{
    chain_weights, ilf_gradient, locate, q_function, solve_ilf, synthesize_lmi, u_fxts_branch, verify_lmi,
    ILFParams, ILFSolveConfig, Region,
};
use outstab::linalg::{cholesky, eig_sym};
use outstab::scenario::{builtin_scenario, execute, ScenarioOutcome};
use outstab::sim::Trajectory;

type Check = Result<(bool, String), String>;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn run_builtin(name: &str) -> Result<ScenarioOutcome, String> {
    let sc = builtin_scenario(name).map_err(|e| e.to_string())?;
    execute(&sc).map_err(|e| e.to_string())
}

/// First grid time after which the plant state (first `n` components) stays
/// within `eps`; `None` if it is still outside at the last sample.
fn state_settling(traj: &Trajectory, n: usize, eps: f64) -> Option<f64> {
    let times = traj.times();
    let mut t_star = Some(times[0]);
    for k in 0..traj.len() {
        if norm(&traj.state(k)[..n]) > eps {
            t_star = times.get(k + 1).copied();
        }
    }
    t_star
}

/// Central differences with a step relative to `|x|`, so states near the
/// origin (where `x₁ ~ V^{1.5}`) are not swamped by the step.
fn relative_difference(g: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-5 * norm(x);
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = g(&y);
            y[i] = x[i] - h;
            let down = g(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn double_integrator() -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
    )
}

fn example4_params() -> Result<ILFParams, String> {
    let (a, b) = double_integrator();
    let (r1, r2) = chain_weights(2, -0.5, 0.5);
    synthesize_lmi(&a, &b, -0.5, 0.5, &r1, &r2, 7).map_err(|e| e.to_string())
}

fn formula_bounds() -> Check {
    let vals = [
        ("finite_time_bound(1,1,0.5)", finite_time_bound(1.0, 1.0, 0.5), 2.0),
        ("fixed_time_bound(1,0.5,1,2)", fixed_time_bound(1.0, 0.5, 1.0, 2.0), 3.0),
        ("set_attraction_bound(1,2,1)", set_attraction_bound(1.0, 2.0, 1.0), 1.0),
    ];
    let mut ok = true;
    let mut msg = Vec::new();
    for (name, v, want) in vals {
        let v = v.map_err(|e| e.to_string())?;
        ok &= (v - want).abs() <= 1e-12;
        msg.push(format!("{name} = {v}"));
    }
    Ok((ok, msg.join(", ")))
}

fn comparison_dominance() -> Check {
    let ft = run_builtin("comparison-finite-time")?;
    let t_ft = ft.summary.runs[0].t_settle.ok_or("finite-time run did not settle")?;
    let bound = finite_time_bound(1.0, 1.0, 0.5).map_err(|e| e.to_string())?;
    let ok_ft = ft.summary.runs[0].settled && (t_ft - 2.0).abs() <= 2e-3 && t_ft <= bound;

    let at = run_builtin("comparison-attraction")?;
    let t_at: Vec<Option<f64>> = at.summary.settling_times();
    // exact arrival 1 − 1/V₀; the grid may land on either side of it
    let ok_at = t_at.iter().all(|t| t.is_some_and(|t| t <= 1.0 + 1e-3));

    let fx = run_builtin("comparison-fixed-time")?;
    let t_fx: Vec<Option<f64>> = fx.summary.settling_times();
    let ok_fx = t_fx.iter().all(|t| t.is_some_and(|t| t <= 3.0));
    Ok((
        ok_ft && ok_at && ok_fx,
        format!("finite-time settles at {t_ft:.4} (bound {bound}); V=1 reached at {t_at:?}; fixed-time settles at {t_fx:?} (bound 3)"),
    ))
}

fn certification() -> Check {
    let samples = default_samples(2, DEFAULT_SAMPLE_COUNT).map_err(|e| e.to_string())?;
    let r1 = example1_certificate().and_then(|c| c.check(&samples)).map_err(|e| e.to_string())?;
    let r2 = example2_certificate().and_then(|c| c.check(&samples)).map_err(|e| e.to_string())?;
    Ok((
        r1.passed() && r2.passed() && r1.total_violations() == 0 && r2.total_violations() == 0,
        format!(
            "example1 {:?} ({} violations), example2 {:?} ({} violations) over {} samples",
            r1.verdict,
            r1.total_violations(),
            r2.verdict,
            r2.total_violations(),
            samples.len()
        ),
    ))
}

fn adaptive_finite_time() -> Check {
    let out = run_builtin("example3")?;
    let horizon = out.summary.integrator.horizon;
    let mut ok_settle = true;
    let mut ok_omega = true;
    let mut ok_mono = true;
    let mut parts = Vec::new();
    for (run, traj) in out.summary.runs.iter().zip(&out.trajectories) {
        let t_star = state_settling(traj, 2, 1e-3);
        // require a confirmed rest interval before the horizon
        ok_settle &= run.diverged_at.is_none() && t_star.is_some_and(|t| t <= horizon - out.summary.settling_dwell);
        let (w, cap) = (run.max_abs_omega.unwrap_or(f64::INFINITY), run.omega_cap.unwrap_or(0.0));
        ok_omega &= w <= 10.0 * cap;
        let rise = run.candidate_max_rise.unwrap_or(f64::INFINITY);
        ok_mono &= rise <= 1e-6;
        parts.push(format!("x0={:?}: t*={t_star:?}, max|ω|={w:.3} (cap {cap:.3}), V rise {rise:.2e}", run.x0));
    }
    Ok((
        ok_settle && ok_omega && ok_mono,
        format!("settle {ok_settle}, ω bounded {ok_omega}, candidate nonincreasing {ok_mono}; {}", parts.join("; ")),
    ))
}

fn non_adaptive_contrast() -> Check {
    let out = run_builtin("example3-noadapt")?;
    let run = &out.summary.runs[0];
    let final_norm = norm(&run.final_state[..2]);
    let ok = run.diverged_at.is_some() || !(final_norm <= 1e-3);
    Ok((ok, format!("diverged at {:?}, final |x| = {final_norm:.3e}", run.diverged_at)))
}

fn fixed_time_uniformity() -> Check {
    let fx = run_builtin("example4")?;
    let ts: Vec<Option<f64>> = fx.trajectories.iter().map(|t| state_settling(t, 2, 1e-2)).collect();
    let horizon = fx.summary.integrator.horizon;
    let finite: Option<Vec<f64>> = ts.iter().map(|t| t.filter(|t| *t < horizon)).collect();
    let ratio = finite.as_ref().map(|v| {
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    let ok_fx = fx.summary.runs.iter().all(|r| r.diverged_at.is_none()) && ratio.is_some_and(|r| r < 3.0);

    let ft = run_builtin("example3-nominal")?;
    let tn: Vec<Option<f64>> = ft.trajectories.iter().map(|t| state_settling(t, 2, 1e-2)).collect();
    let ok_ft = tn.iter().all(|t| t.is_some()) && tn.windows(2).all(|w| w[0] < w[1]);
    Ok((
        ok_fx && ok_ft,
        format!("ILF settling {ts:?} (max/min {ratio:?}); finite-time settling {tn:?}"),
    ))
}

fn ilf_solver() -> Check {
    let p = example4_params()?;
    let cfg = ILFSolveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let random_state = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let radius = 10f64.powf(rng.gen_range(-3.0..3.0));
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        vec![radius * t.cos(), radius * t.sin()]
    };

    let mut worst_q = 0.0_f64;
    for _ in 0..10_000 {
        let x = random_state(&mut rng);
        let (v, region) = locate(&x, &p, &cfg).map_err(|e| e.to_string())?;
        let q = q_function(v, &x, p.x_inv(), p.weights(region)).map_err(|e| e.to_string())?;
        worst_q = worst_q.max(q.abs());
    }

    let l = cholesky(p.x()).ok_or("X is not positive definite")?;
    let surface: Vec<Vec<f64>> = (0..100)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 100.0;
            let x = &l * nalgebra::DVector::from_column_slice(&[t.cos(), t.sin()]);
            x.iter().cloned().collect()
        })
        .collect();
    let mut worst_v = 0.0_f64;
    let mut worst_branch = 0.0_f64;
    for x in &surface {
        let v = solve_ilf(x, &p, &cfg).map_err(|e| e.to_string())?;
        worst_v = worst_v.max((v - 1.0).abs());
        let ui = u_fxts_branch(x, &p, &cfg, Region::Inner).map_err(|e| e.to_string())?;
        let uo = u_fxts_branch(x, &p, &cfg, Region::Outer).map_err(|e| e.to_string())?;
        let kx: f64 = (0..2).map(|j| p.gain()[(0, j)] * x[j]).sum();
        worst_branch = worst_branch.max((ui - uo).abs() / (1.0 + kx.abs()));
    }

    let solve = |x: &[f64]| solve_ilf(x, &p, &cfg).unwrap_or(f64::NAN);
    let mut worst_g = 0.0_f64;
    let mut checked = 0;
    while checked < 1000 {
        let x = random_state(&mut rng);
        if (p.ellipsoid_form(&x) - 1.0).abs() < 1e-3 {
            continue;
        }
        let v = solve_ilf(&x, &p, &cfg).map_err(|e| e.to_string())?;
        let g = ilf_gradient(&x, v, &p).map_err(|e| e.to_string())?;
        let fd = relative_difference(&solve, &x);
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst_g = worst_g.max(norm(&diff) / norm(&g));
        checked += 1;
    }
    Ok((
        worst_q <= 1e-10 && worst_v <= 1e-9 && worst_g <= 1e-4 && worst_branch <= 1e-6,
        format!(
            "max |Q| {worst_q:.2e}, max |V−1| on surface {worst_v:.2e}, gradient rel err {worst_g:.2e}, branch mismatch {worst_branch:.2e}"
        ),
    ))
}

fn homogeneity_suite() -> Check {
    let (samples, lambdas) = homogeneity_samples(2, 1000, 5);
    let d = WeightedDilation::new(vec![1.5, 1.0]).map_err(|e| e.to_string())?;
    let mut group = 0.0_f64;
    let mut scaling = 0.0_f64;
    for x in &samples {
        for w in lambdas.windows(2) {
            let (a, b) = (w[0], w[1]);
            let lhs = d.dilate(a, &d.dilate(b, x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let rhs = d.dilate(a * b, x).map_err(|e| e.to_string())?;
            for (l, r) in lhs.iter().zip(&rhs) {
                group = group.max((l - r).abs() / r.abs().max(1.0));
            }
            let nx = d.homogeneous_norm(x).map_err(|e| e.to_string())?;
            let nd = d.homogeneous_norm(&d.dilate(a, x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            scaling = scaling.max((nd - a * nx).abs() / (a * nx).max(1.0));
        }
    }
    let field = check_homogeneous_field(|x| vec![x[1], u_fts(x, 0.5)], &d, -0.5, &samples, &lambdas, 1e-9)
        .map_err(|e| e.to_string())?;
    let p = FTControllerParams::without_lyapunov_check(0.5, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let lyap = check_homogeneous_function(|x| v_fts(x, &p), &d, 2.5, &samples, &lambdas, 1e-9)
        .map_err(|e| e.to_string())?;
    Ok((
        group <= 1e-9 && scaling <= 1e-9 && field.passed && lyap.passed,
        format!(
            "group law {group:.2e}, norm scaling {scaling:.2e}, loop field {:.2e}, V_FTS {:.2e}",
            field.max_relative_error, lyap.max_relative_error
        ),
    ))
}

fn gradient_oracles() -> Check {
    let p = FTControllerParams::without_lyapunov_check(0.5, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = |x: &[f64]| v_fts(x, &p);
    let mut worst_grad = 0.0_f64;
    for _ in 0..1000 {
        let r = rng.gen_range(0.5..2.0);
        let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let x = [r * t.cos(), r * t.sin()];
        let g = grad_v_fts(&x, &p);
        let fd = central_difference(&v, &x);
        let diff = [g[0] - fd[0], g[1] - fd[1]];
        worst_grad = worst_grad.max(norm(&diff) / norm(&g).max(1e-12));
    }

    let (a, b) = double_integrator();
    let params = example4_params()?;
    let margins = verify_lmi(&a, &b, &params).map_err(|e| e.to_string())?;

    let mut worst_eig = 0.0_f64;
    for _ in 0..1000 {
        let (p11, p12, p22): (f64, f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let m = DMatrix::from_row_slice(2, 2, &[p11, p12, p12, p22]);
        let ev = eig_sym(&m).map_err(|e| e.to_string())?;
        let mid = 0.5 * (p11 + p22);
        let rad = (0.25 * (p11 - p22).powi(2) + p12 * p12).sqrt();
        let scale = mid.abs() + rad;
        worst_eig = worst_eig.max(((ev[0] - (mid - rad)).abs()).max((ev[1] - (mid + rad)).abs()) / scale.max(1.0));
    }
    Ok((
        worst_grad <= 1e-5 && margins.passed() && worst_eig <= 1e-12,
        format!(
            "grad_v_fts rel err {worst_grad:.2e}, LMI margins {:?} (passed {}), eig_sym 2x2 err {worst_eig:.2e}",
            margins.triple(),
            margins.passed()
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("closed-form settling bounds", formula_bounds),
        ("comparison equations stay within their bounds", comparison_dominance),
        ("output stability certificates for examples 1 and 2", certification),
        ("adaptive finite-time closed loop", adaptive_finite_time),
        ("finite-time feedback alone does not settle", non_adaptive_contrast),
        ("fixed-time uniformity of the ILF loop", fixed_time_uniformity),
        ("implicit Lyapunov function solver", ilf_solver),
        ("homogeneity properties", homogeneity_suite),
        ("gradient and eigenvalue oracles", gradient_oracles),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        if !ok {
            failures += 1;
        }
        println!("[{}] {} {name} ({secs:.2} s): {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
