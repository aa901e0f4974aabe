//! Weighted dilations `D_r(λ) = diag(λ^{rᵢ})`, the associated homogeneous norm
//! and numerical homogeneity checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed power `⌈x⌋^β = |x|^β·sign(x)`, with `sign(0) = 0`.
pub fn sign_power(x: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("sign_power exponent must be positive, got {beta}")));
    }
    Ok(spow(x, beta))
}

/// Unchecked signed power for internal use where `beta > 0` is already known.
#[inline]
pub(crate) fn spow(x: f64, beta: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(beta).copysign(x)
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A weight vector together with the exponent of its homogeneous norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDilation {
    weights: Vec<f64>,
    rho: f64,
}

impl WeightedDilation {
    /// Builds a dilation with the default norm exponent `ρ = 2·max rᵢ`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let rho = 2.0 * weights.iter().cloned().fold(f64::NAN, f64::max);
        Self::with_rho(weights, rho)
    }

    pub fn with_rho(weights: Vec<f64>, rho: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weight vector must be nonempty"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("weights must be positive and finite, got {w}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("norm exponent must be positive, got {rho}")));
        }
        Ok(Self { weights, rho })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn r_min(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn r_max(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "state has dimension {} but dilation has {} weights",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(())
    }

    /// `D_r(λ)x`, componentwise `λ^{rᵢ}·xᵢ`.
    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("dilation parameter must be positive, got {lambda}")));
        }
        Ok(dilate_unchecked(&self.weights, lambda, x))
    }

    /// `‖x‖_r = (Σ |xᵢ|^{ρ/rᵢ})^{1/ρ}`.
    pub fn homogeneous_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let s: f64 = x
            .iter()
            .zip(&self.weights)
            .map(|(xi, ri)| xi.abs().powf(self.rho / ri))
            .sum();
        Ok(s.powf(1.0 / self.rho))
    }

    /// Splits `x ≠ 0` into `(z, λ)` with `‖z‖_r = 1` and `D_r(λ)z = x`.
    pub fn project_to_sphere(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let lambda = self.homogeneous_norm(x)?;
        if lambda == 0.0 {
            return Err(Error::Domain("the origin has no homogeneous-sphere representative".into()));
        }
        Ok((dilate_unchecked(&self.weights, 1.0 / lambda, x), lambda))
    }

    /// Deterministic sample of points on the unit homogeneous sphere: an even
    /// angular grid (for `n = 2`) or seeded uniform box points, each projected.
    pub fn sphere_samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(count);
        if n == 2 {
            for k in 0..count {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                let p = [t.cos(), t.sin()];
                out.push(self.project_to_sphere(&p).expect("nonzero grid point").0);
            }
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while out.len() < count {
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Ok((z, _)) = self.project_to_sphere(&p) {
                out.push(z);
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dilate_unchecked(weights: &[f64], lambda: f64, x: &[f64]) -> Vec<f64> {
    x.iter().zip(weights).map(|(xi, ri)| lambda.powf(*ri) * xi).collect()
}

/// Outcome of a sampled homogeneity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub degree_tested: f64,
    pub max_relative_error: f64,
    pub samples_used: usize,
    pub passed: bool,
}

fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1.0)
}

fn validate_samples(samples: &[Vec<f64>], lambdas: &[f64], dim: usize) -> Result<()> {
    if samples.is_empty() || lambdas.is_empty() {
        return Err(Error::invalid("homogeneity check needs at least one sample and one λ"));
    }
    for s in samples {
        if s.len() != dim {
            return Err(Error::invalid("sample dimension does not match the dilation"));
        }
        if s.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("homogeneity samples must be nonzero"));
        }
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::invalid(format!("λ must be positive, got {l}")));
    }
    Ok(())
}

/// Checks `f(D_r(λ)x) = λ^degree·D_r(λ)f(x)` componentwise over all sample/λ pairs.
///
/// The error of each component is measured relative to `max(1, |reference|)`.
pub fn check_homogeneous_field<F>(
    f: F,
    d: &WeightedDilation,
    degree: f64,
    samples: &[Vec<f64>],
    lambdas: &[f64],
    tol: f64,
) -> Result<HomogeneityReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    validate_samples(samples, lambdas, d.dim())?;
    let mut worst = 0.0_f64;
    for x in samples {
        let fx = f(x);
        for &lambda in lambdas {
            let lhs = f(&dilate_unchecked(d.weights(), lambda, x));
            let scale = lambda.powf(degree);
            let rhs = dilate_unchecked(d.weights(), lambda, &fx);
            for (l, r) in lhs.iter().zip(&rhs) {
                let e = rel_err(*l, scale * r);
                worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
            }
        }
    }
    Ok(HomogeneityReport {
        degree_tested: degree,
        max_relative_error: worst,
        samples_used: samples.len() * lambdas.len(),
        passed: worst <= tol,
    })
}

/// Scalar version: `g(D_r(λ)x) = λ^degree·g(x)`.
pub fn check_homogeneous_function<G>(
    g: G,
    d: &WeightedDilation,
    degree: f64,
    samples: &[Vec<f64>],
    lambdas: &[f64],
    tol: f64,
) -> Result<HomogeneityReport>
where
    G: Fn(&[f64]) -> f64,
{
    validate_samples(samples, lambdas, d.dim())?;
    let mut worst = 0.0_f64;
    for x in samples {
        let gx = g(x);
        for &lambda in lambdas {
            let lhs = g(&dilate_unchecked(d.weights(), lambda, x));
            let e = rel_err(lhs, lambda.powf(degree) * gx);
            worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
        }
    }
    Ok(HomogeneityReport {
        degree_tested: degree,
        max_relative_error: worst,
        samples_used: samples.len() * lambdas.len(),
        passed: worst <= tol,
    })
}

/// Seeded test states plus a fixed canonical grid, and seeded dilation
/// parameters in `[0.1, 10]` (log-uniform) together with a few fixed values.
pub fn homogeneity_samples(dim: usize, count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(count + 2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            states.push(e);
        }
    }
    while states.len() < count.max(2 * dim) {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        if p.iter().any(|v| *v != 0.0) {
            states.push(p);
        }
    }
    let mut lambdas = vec![0.1, 0.5, 2.0, 10.0];
    lambdas.extend((0..4).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))));
    (states, lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilate_examples() {
        let d = WeightedDilation::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(d.dilate(1.0, &[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        let d = WeightedDilation::new(vec![2.0, 1.0]).unwrap();
        assert_eq!(d.dilate(2.0, &[1.0, 1.0]).unwrap(), vec![4.0, 2.0]);
        let d = WeightedDilation::new(vec![1.5, 1.0]).unwrap();
        let y = d.dilate(0.5, &[8.0, 8.0]).unwrap();
        assert!((y[0] - 2.828_427_124_746_19).abs() < 1e-12);
        assert_eq!(y[1], 4.0);
    }

    #[test]
    fn dilate_errors() {
        let d = WeightedDilation::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(d.dilate(0.0, &[1.0, 1.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(d.dilate(-1.0, &[1.0, 1.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(d.dilate(1.0, &[1.0]), Err(Error::InvalidArgument(_))));
        assert!(WeightedDilation::new(vec![1.0, 0.0]).is_err());
        assert!(WeightedDilation::with_rho(vec![1.0], -2.0).is_err());
    }

    #[test]
    fn norm_examples() {
        let d = WeightedDilation::with_rho(vec![1.0, 1.0], 2.0).unwrap();
        assert!((d.homogeneous_norm(&[1.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.homogeneous_norm(&[0.0, 0.0]).unwrap(), 0.0);
        let d = WeightedDilation::with_rho(vec![3.0, 2.0], 6.0).unwrap();
        let v = d.homogeneous_norm(&[8.0, 4.0]).unwrap();
        // 8^{6/3} + 4^{6/2} = 64 + 64
        assert!((v - 128f64.powf(1.0 / 6.0)).abs() < 1e-12);
        assert!(d.homogeneous_norm(&[1.0]).is_err());
    }

    #[test]
    fn default_rho_is_twice_max_weight() {
        let d = WeightedDilation::new(vec![1.5, 1.0]).unwrap();
        assert_eq!(d.rho(), 3.0);
        assert_eq!(d.r_min(), 1.0);
        assert_eq!(d.r_max(), 1.5);
    }

    #[test]
    fn sign_power_examples() {
        assert_eq!(sign_power(-4.0, 0.5).unwrap(), -2.0);
        assert_eq!(sign_power(0.0, 0.3).unwrap(), 0.0);
        assert!((sign_power(9.0, 1.5).unwrap() - 27.0).abs() < 1e-12);
        assert!(sign_power(1.0, 0.0).is_err());
        assert!(sign_power(1.0, -1.0).is_err());
    }

    #[test]
    fn project_examples() {
        let d = WeightedDilation::with_rho(vec![1.0, 1.0], 2.0).unwrap();
        let (z, l) = d.project_to_sphere(&[3.0, 4.0]).unwrap();
        assert!((l - 5.0).abs() < 1e-14);
        assert!((z[0] - 0.6).abs() < 1e-14 && (z[1] - 0.8).abs() < 1e-14);
        let (z, l) = d.project_to_sphere(&[0.0, 2.0]).unwrap();
        assert_eq!((z, l), (vec![0.0, 1.0], 2.0));
        assert!(matches!(d.project_to_sphere(&[0.0, 0.0]), Err(Error::Domain(_))));
    }

    /// Bisection on `λ ↦ ‖D_r(1/λ)x‖_r − 1`, independent of the closed form.
    fn sphere_scale_by_bisection(d: &WeightedDilation, x: &[f64]) -> f64 {
        let g = |l: f64| d.homogeneous_norm(&dilate_unchecked(d.weights(), 1.0 / l, x)).unwrap() - 1.0;
        let (mut lo, mut hi) = (1e-9_f64, 1e9_f64);
        for _ in 0..300 {
            let mid = (lo * hi).sqrt();
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn project_matches_bisection_oracle() {
        let d = WeightedDilation::with_rho(vec![2.0, 1.0], 2.0).unwrap();
        let (z, l) = d.project_to_sphere(&[4.0, 0.0]).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        assert!((z[0] - 1.0).abs() < 1e-12 && z[1] == 0.0);
        assert!((sphere_scale_by_bisection(&d, &[4.0, 0.0]) - 2.0).abs() < 1e-9);
        let d = WeightedDilation::new(vec![1.5, 1.0]).unwrap();
        for x in [[0.3, -2.0], [5.0, 0.1], [-1.0, -1.0]] {
            let (_, l) = d.project_to_sphere(&x).unwrap();
            assert!((l - sphere_scale_by_bisection(&d, &x)).abs() < 1e-9 * l);
        }
    }

    #[test]
    fn linear_field_is_degree_zero_standard_homogeneous() {
        let d = WeightedDilation::new(vec![1.0, 1.0]).unwrap();
        let (xs, ls) = homogeneity_samples(2, 50, 7);
        let f = |x: &[f64]| vec![2.0 * x[0] - x[1], 0.5 * x[0] + 3.0 * x[1]];
        let rep = check_homogeneous_field(f, &d, 0.0, &xs, &ls, 1e-12).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn relay_double_integrator_is_degree_minus_one() {
        // f(λ²x₁, λx₂) = (λx₂, −sign x₁) and λ⁻¹D(λ)f(x) = (λ⁻¹λ²x₂, −λ⁻¹λ sign x₁),
        // checked by hand at (1,1), (−2,3), (0.5,−1).
        let d = WeightedDilation::new(vec![2.0, 1.0]).unwrap();
        let f = |x: &[f64]| vec![x[1], -sign(x[0])];
        let hand = vec![vec![1.0, 1.0], vec![-2.0, 3.0], vec![0.5, -1.0]];
        let rep = check_homogeneous_field(f, &d, -1.0, &hand, &[0.5, 3.0], 1e-12).unwrap();
        assert!(rep.passed);
        let (xs, ls) = homogeneity_samples(2, 100, 3);
        assert!(check_homogeneous_field(f, &d, -1.0, &xs, &ls, 1e-12).unwrap().passed);
        // wrong degree is detected
        assert!(!check_homogeneous_field(f, &d, -0.5, &xs, &ls, 1e-6).unwrap().passed);
    }

    #[test]
    fn empty_samples_rejected() {
        let d = WeightedDilation::new(vec![1.0]).unwrap();
        assert!(check_homogeneous_function(|x| x[0], &d, 1.0, &[], &[2.0], 1e-9).is_err());
        assert!(check_homogeneous_function(|x| x[0], &d, 1.0, &[vec![0.0]], &[2.0], 1e-9).is_err());
    }
}
