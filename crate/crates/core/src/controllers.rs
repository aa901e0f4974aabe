//! Homogeneous finite-time control of the double integrator and the adaptive
//! finite-time / fixed-time laws built on top of a nominal stabilizer.
//!
//! The nominal controller is
//! `u_FTS(x) = −⌈x₂⌋^α − ⌈χ_α⌋^{α/(2−α)}`, `χ_α = x₁ + ⌈x₂⌋^{2−α}/(2−α)`,
//! which makes `ẋ₁ = x₂, ẋ₂ = u` homogeneous of degree `α − 1` for the weights
//! `r = (2 − α, 1)`. Its Lyapunov function
//! `V(x) = (2−α)/(3−α)|χ|^{(3−α)/(2−α)} + s·x₂·χ + l/(3−α)|x₂|^{3−α}`
//! is homogeneous of degree `3 − α`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{assemble_adaptive_loop, ScalarMap, SystemModel, UncertainPlant};
use crate::error::{Error, Result};
use crate::homogeneity::{spow, WeightedDilation};

/// Number of homogeneous-sphere points used to validate `(l, s)`.
pub const LYAPUNOV_CHECK_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTControllerParams {
    pub alpha: f64,
    pub l: f64,
    pub s: f64,
    pub gamma: f64,
}

impl FTControllerParams {
    /// Validates ranges and that `V` is a strict Lyapunov function of the
    /// nominal loop on a canonical sample of the unit homogeneous sphere.
    pub fn new(alpha: f64, l: f64, s: f64, gamma: f64) -> Result<Self> {
        let p = Self::without_lyapunov_check(alpha, l, s, gamma)?;
        let check = p.lyapunov_check();
        if !(check.min_value > 0.0) {
            return Err(Error::invalid(format!(
                "(l, s) = ({l}, {s}) does not make V positive definite: min on sphere {:.3e}",
                check.min_value
            )));
        }
        if !(check.max_derivative < 0.0) {
            return Err(Error::invalid(format!(
                "(l, s) = ({l}, {s}) does not make V decrease along the nominal loop: max dV/dt on sphere {:.3e}",
                check.max_derivative
            )));
        }
        Ok(p)
    }

    /// Range checks only. Use this to reproduce tunings that are known not to
    /// give a strict Lyapunov function (the loop may still converge).
    pub fn without_lyapunov_check(alpha: f64, l: f64, s: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        for (name, v) in [("l", l), ("s", s), ("gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { alpha, l, s, gamma })
    }

    /// Weights `(2 − α, 1)` of the homogeneous closed loop.
    pub fn dilation(&self) -> WeightedDilation {
        WeightedDilation::new(vec![2.0 - self.alpha, 1.0]).expect("weights are positive")
    }

    /// Homogeneity degree `α − 1` of the nominal closed loop.
    pub fn loop_degree(&self) -> f64 {
        self.alpha - 1.0
    }

    /// Homogeneity degree `3 − α` of `V`.
    pub fn lyapunov_degree(&self) -> f64 {
        3.0 - self.alpha
    }

    /// Extremes of `V` and of `dV/dt` along the nominal loop over the sphere sample.
    pub fn lyapunov_check(&self) -> LyapunovCheck {
        let d = self.dilation();
        let mut min_value = f64::INFINITY;
        let mut max_derivative = f64::NEG_INFINITY;
        for z in d.sphere_samples(LYAPUNOV_CHECK_POINTS, 0) {
            min_value = min_value.min(v_fts(&z, self));
            let g = grad_v_fts(&z, self);
            let vdot = g[0] * z[1] + g[1] * u_fts(&z, self.alpha);
            max_derivative = max_derivative.max(vdot);
        }
        LyapunovCheck { min_value, max_derivative }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCheck {
    pub min_value: f64,
    pub max_derivative: f64,
}

/// Known bound `|θ| ≤ θ_max` and adaptation gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FxTAdaptiveParams {
    pub theta_max: f64,
    pub gamma: f64,
}

impl FxTAdaptiveParams {
    pub fn new(theta_max: f64, gamma: f64) -> Result<Self> {
        if !(theta_max > 0.0 && theta_max.is_finite()) {
            return Err(Error::invalid(format!("theta_max must be positive, got {theta_max}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { theta_max, gamma })
    }
}

pub fn chi_alpha(x: &[f64], alpha: f64) -> f64 {
    x[0] + spow(x[1], 2.0 - alpha) / (2.0 - alpha)
}

pub fn u_fts(x: &[f64], alpha: f64) -> f64 {
    -spow(x[1], alpha) - spow(chi_alpha(x, alpha), alpha / (2.0 - alpha))
}

pub fn v_fts(x: &[f64], p: &FTControllerParams) -> f64 {
    let a = p.alpha;
    let chi = chi_alpha(x, a);
    (2.0 - a) / (3.0 - a) * chi.abs().powf((3.0 - a) / (2.0 - a))
        + p.s * x[1] * chi
        + p.l / (3.0 - a) * x[1].abs().powf(3.0 - a)
}

/// Analytic gradient of [`v_fts`]:
///
/// `∂V/∂x₁ = ⌈χ⌋^{1/(2−α)} + s·x₂`,
/// `∂V/∂x₂ = ⌈χ⌋^{1/(2−α)}|x₂|^{1−α} + s·χ + (s + l)·x₂|x₂|^{1−α}`.
pub fn grad_v_fts(x: &[f64], p: &FTControllerParams) -> [f64; 2] {
    let a = p.alpha;
    let chi = chi_alpha(x, a);
    let c = spow(chi, 1.0 / (2.0 - a));
    let w = x[1].abs().powf(1.0 - a);
    [c + p.s * x[1], c * w + p.s * chi + (p.s + p.l) * x[1] * w]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finite-time adaptation `ω̇ = γ·φ(x)·(∂V/∂x·B)`.
pub fn adapt_ft(x: &[f64], phi_x: &[f64], b: &[f64], p: &FTControllerParams) -> Vec<f64> {
    let g = grad_v_fts(x, p);
    let gb = dot(&g, b);
    phi_x.iter().map(|ph| p.gamma * ph * gb).collect()
}

/// `u_FTS(x) − φ(x)ᵀω`.
pub fn u_adaptive_ft(x: &[f64], omega: &[f64], phi_x: &[f64], alpha: f64) -> f64 {
    u_fts(x, alpha) - dot(phi_x, omega)
}

/// Effective estimate `θ̂ = θ_max·arctan(ω)` (componentwise).
pub fn theta_hat(omega: &[f64], p: &FxTAdaptiveParams) -> Vec<f64> {
    omega.iter().map(|w| p.theta_max * w.atan()).collect()
}

/// `u_nominal − θ_max·φ(x)ᵀ arctan(ω)`.
pub fn u_adaptive_fxt(u_nominal: f64, omega: &[f64], phi_x: &[f64], p: &FxTAdaptiveParams) -> f64 {
    u_nominal - dot(phi_x, &theta_hat(omega, p))
}

/// `ω̇ᵢ = γ θ_max⁻¹ (1 + ωᵢ²) φᵢ(x)·(∂V/∂x·B)`.
pub fn adapt_fxt(omega: &[f64], phi_x: &[f64], grad_v_b: f64, p: &FxTAdaptiveParams) -> Vec<f64> {
    omega
        .iter()
        .zip(phi_x)
        .map(|(w, ph)| p.gamma / p.theta_max * (1.0 + w * w) * ph * grad_v_b)
        .collect()
}

/// A fixed-time stabilizer for `ẋ = Ax + Bu` together with its Lyapunov function.
pub trait FixedTimeController: Send + Sync {
    fn control(&self, x: &[f64]) -> Result<f64>;
    fn lyapunov(&self, x: &[f64]) -> Result<f64>;
    fn lyapunov_gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

fn require_double_integrator_dims(plant: &UncertainPlant) -> Result<()> {
    if plant.state_dim() != 2 {
        return Err(Error::invalid("the homogeneous finite-time controller is defined for n = 2"));
    }
    Ok(())
}

/// Plant under `u = u_FTS(x)` alone (no compensation of the uncertainty).
pub fn nominal_ft_loop(plant: &UncertainPlant, alpha: f64) -> Result<SystemModel> {
    require_double_integrator_dims(plant)?;
    let control: ScalarMap = Arc::new(move |x: &[f64]| u_fts(x, alpha));
    Ok(plant.closed_loop(format!("{}-fts", plant.name()), control))
}

/// Adaptive finite-time loop `u = u_FTS − φᵀω`, `ω̇ = γφ(∂V/∂x·B)`.
pub fn adaptive_ft_loop(plant: &UncertainPlant, p: FTControllerParams) -> Result<SystemModel> {
    require_double_integrator_dims(plant)?;
    let phi_u = plant.regressor_map();
    let phi_w = plant.regressor_map();
    let b: Vec<f64> = plant.b().iter().cloned().collect();
    let alpha = p.alpha;
    Ok(assemble_adaptive_loop(
        plant,
        Arc::new(move |x: &[f64], w: &[f64]| u_adaptive_ft(x, w, &phi_u(x), alpha)),
        Arc::new(move |x: &[f64], _w: &[f64]| adapt_ft(x, &phi_w(x), &b, &p)),
    ))
}

/// Plant under the fixed-time nominal feedback alone. Solver failures surface
/// as non-finite derivatives, which the integrator reports as divergence.
pub fn nominal_fxt_loop(plant: &UncertainPlant, ctl: Arc<dyn FixedTimeController>) -> SystemModel {
    let control: ScalarMap = Arc::new(move |x: &[f64]| ctl.control(x).unwrap_or(f64::NAN));
    plant.closed_loop(format!("{}-fxts", plant.name()), control)
}

/// Adaptive fixed-time loop with the arctan parameterization.
pub fn adaptive_fxt_loop(
    plant: &UncertainPlant,
    ctl: Arc<dyn FixedTimeController>,
    p: FxTAdaptiveParams,
) -> SystemModel {
    let phi_u = plant.regressor_map();
    let phi_w = plant.regressor_map();
    let b: Vec<f64> = plant.b().iter().cloned().collect();
    let ctl_w = ctl.clone();
    assemble_adaptive_loop(
        plant,
        Arc::new(move |x: &[f64], w: &[f64]| {
            let u0 = ctl.control(x).unwrap_or(f64::NAN);
            u_adaptive_fxt(u0, w, &phi_u(x), &p)
        }),
        Arc::new(move |x: &[f64], w: &[f64]| match ctl_w.lyapunov_gradient(x) {
            Ok(g) => adapt_fxt(w, &phi_w(x), dot(&g, &b), &p),
            Err(_) => vec![f64::NAN; w.len()],
        }),
    )
}

/// `V_FTS(x) + ½γ⁻¹|θ − ω|²`.
pub fn ft_candidate(x: &[f64], omega: &[f64], theta: &[f64], p: &FTControllerParams) -> f64 {
    let e2: f64 = theta.iter().zip(omega).map(|(t, w)| (t - w) * (t - w)).sum();
    v_fts(x, p) + 0.5 / p.gamma * e2
}

/// `V_FxTS(x) + ½γ⁻¹|θ − θ_max arctan ω|²` given `V_FxTS(x)`.
pub fn fxt_candidate(v_nominal: f64, omega: &[f64], theta: &[f64], p: &FxTAdaptiveParams) -> f64 {
    let th = theta_hat(omega, p);
    let e2: f64 = theta.iter().zip(&th).map(|(t, h)| (t - h) * (t - h)).sum();
    v_nominal + 0.5 / p.gamma * e2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::example3_plant;

    fn unit() -> FTControllerParams {
        FTControllerParams::without_lyapunov_check(0.5, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_alpha(&[0.0, 0.0], 0.5), 0.0);
        assert_eq!(chi_alpha(&[1.0, 0.0], 0.5), 1.0);
        assert!((chi_alpha(&[0.0, 1.0], 0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn u_fts_examples() {
        assert_eq!(u_fts(&[0.0, 0.0], 0.5), 0.0);
        let expected = -1.0 - (2.0f64 / 3.0).powf(1.0 / 3.0);
        assert!((u_fts(&[0.0, 1.0], 0.5) - expected).abs() < 1e-14);
        assert!((u_fts(&[0.0, 1.0], 0.5) + 1.8736).abs() < 1e-4);
    }

    #[test]
    fn v_fts_examples() {
        let p = unit();
        assert_eq!(v_fts(&[0.0, 0.0], &p), 0.0);
        assert!((v_fts(&[1.0, 0.0], &p) - 0.6).abs() < 1e-15);
        assert_eq!(grad_v_fts(&[0.0, 0.0], &p), [0.0, 0.0]);
        let g = grad_v_fts(&[1.0, 0.0], &p);
        assert!((g[0] - 1.0).abs() < 1e-15 && g[1] == 1.0);
    }

    #[test]
    fn unit_tuning_fails_strict_lyapunov_check() {
        let check = unit().lyapunov_check();
        assert!(check.max_derivative > 0.05, "{check:?}");
        assert!(FTControllerParams::new(0.5, 1.0, 1.0, 1.0).is_err());
        assert!(FTControllerParams::new(0.5, 2.0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn param_ranges() {
        assert!(FTControllerParams::without_lyapunov_check(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(FTControllerParams::without_lyapunov_check(0.5, 0.0, 1.0, 1.0).is_err());
        assert!(FTControllerParams::without_lyapunov_check(0.5, 1.0, 1.0, -1.0).is_err());
        assert!(FxTAdaptiveParams::new(0.0, 1.0).is_err());
        assert!(FxTAdaptiveParams::new(5.0, 0.0).is_err());
    }

    #[test]
    fn adaptation_examples() {
        let p = unit();
        let b = [0.0, 1.0];
        let phi = |x: &[f64]| vec![(x[0] * x[1]).sin(), x[1] * x[1]];
        assert_eq!(adapt_ft(&[0.0, 0.0], &phi(&[0.0, 0.0]), &b, &p), vec![0.0, 0.0]);
        // ∂V/∂x₂ at (0,1): (2/3)^{2/3} + 2/3 + 2
        let g2 = (2.0f64 / 3.0).powf(2.0 / 3.0) + 2.0 / 3.0 + 2.0;
        let w = adapt_ft(&[0.0, 1.0], &phi(&[0.0, 1.0]), &b, &p);
        assert_eq!(w[0], 0.0);
        assert!((w[1] - g2).abs() < 1e-14);
        // parallel to φ
        let x = [0.7, -1.3];
        let ph = phi(&x);
        let w = adapt_ft(&x, &ph, &b, &p);
        assert!((w[0] * ph[1] - w[1] * ph[0]).abs() < 1e-14);
    }

    #[test]
    fn adaptive_control_examples() {
        let phi0 = [0.0, 0.0];
        assert_eq!(u_adaptive_ft(&[0.0, 0.0], &[5.0, -3.0], &phi0, 0.5), 0.0);
        let v = u_adaptive_ft(&[0.0, 1.0], &[0.0, 0.0], &[0.0, 1.0], 0.5);
        assert!((v - u_fts(&[0.0, 1.0], 0.5)).abs() < 1e-15);

        let p = FxTAdaptiveParams::new(5.0, 1.0).unwrap();
        assert_eq!(u_adaptive_fxt(0.0, &[1.0, 2.0], &phi0, &p), 0.0);
        let phi = [0.3, -2.0];
        let sat = u_adaptive_fxt(0.0, &[1e300, -1e300], &phi, &p);
        let cap = p.theta_max * std::f64::consts::FRAC_PI_2 * (0.3 + 2.0);
        assert!((sat.abs() - cap).abs() < 1e-12);
        assert!(adapt_fxt(&[1.0, 2.0], &phi0, 3.0, &p).iter().all(|v| *v == 0.0));
        let w = adapt_fxt(&[0.0, 0.0], &phi, 2.0, &p);
        assert!((w[0] - 0.3 * 2.0 / 5.0).abs() < 1e-15 && (w[1] + 2.0 * 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_estimate_recovers_nominal_loop() {
        let plant = example3_plant(vec![3.0, -2.0]).unwrap();
        let sys = adaptive_ft_loop(&plant, unit()).unwrap();
        let nominal = |x: &[f64]| vec![x[1], u_fts(x, 0.5)];
        for x in [[0.3, -1.2], [2.0, 0.5], [-1.0, 1.0]] {
            let f = sys.rhs(&[x[0], x[1], 3.0, -2.0]);
            let n = nominal(&x);
            assert!((f[0] - n[0]).abs() < 1e-14 && (f[1] - n[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_loop_at_origin_and_test_point() {
        let plant = example3_plant(vec![3.0, -2.0]).unwrap();
        let sys = adaptive_ft_loop(&plant, unit()).unwrap();
        assert_eq!(sys.rhs(&[0.0, 0.0, 1.7, -4.0]), vec![0.0; 4]);
        // x = (0,1), ω = 0: ẋ = (1, u_FTS(0,1) − 2), ω̇ = φ(0,1)·∂V/∂x₂
        let f = sys.rhs(&[0.0, 1.0, 0.0, 0.0]);
        let u = -1.0 - (2.0f64 / 3.0).powf(1.0 / 3.0);
        let g2 = (2.0f64 / 3.0).powf(2.0 / 3.0) + 2.0 / 3.0 + 2.0;
        assert_eq!(f[0], 1.0);
        assert!((f[1] - (u - 2.0)).abs() < 1e-14);
        assert_eq!(f[2], 0.0);
        assert!((f[3] - g2).abs() < 1e-14);
    }
}
