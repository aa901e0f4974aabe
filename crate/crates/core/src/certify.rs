//! Sample-based audit of the output finite-time (OFTS) and output fixed-time
//! (OFxTS) sufficient conditions for a pair `(U, W)`, and the closed-form
//! settling-time bounds.
//!
//! Conditions checked at every sample off the output zero set:
//!
//! | name                    | inequality                                  | mode  |
//! |-------------------------|---------------------------------------------|-------|
//! | `output_sandwich_lower` | `ξ₁(|h(x)|) ≤ U(x)`                         | both  |
//! | `output_sandwich_upper` | `U(x) ≤ ξ₂(|h(x)|)`                         | both  |
//! | `w_nonnegative`         | `W(x) ≥ 0`                                  | both  |
//! | `decay`                 | `DV·f ≤ −aU^α`                              | OFTS  |
//! | `two_rate_decay`        | `DV·f ≤ −a₁U^{α₁} − a₂U^{α₂}`               | OFxTS |
//! | `cross_term`            | `|DW·f| ≤ Σ bᵢU^{βᵢ}`                       | both  |
//! | `w_growth`              | `W(x) ≤ σ(ρ + |h(x)|)`                      | OFxTS |
//!
//! A margin is `rhs − lhs + slack`; a condition passes when its worst margin
//! is nonnegative. Passing is evidence, not proof; a failure comes with a
//! concrete violating sample.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{example1_system, example2_system, ScalarMap, SystemModel, VectorMap};
use crate::error::{Error, Result};
use crate::homogeneity::spow;

pub type ClassK = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute slack added to every margin to absorb roundoff and difference noise.
pub const MARGIN_SLACK: f64 = 1e-8;
/// Samples with `|h(x)| ≤ OUTPUT_EXCLUSION` are skipped.
pub const OUTPUT_EXCLUSION: f64 = 1e-6;

/// A candidate pair `(U, W)` with comparison functions. Gradients are optional;
/// without them central differences are used.
#[derive(Clone)]
pub struct CertCandidate {
    pub u: ScalarMap,
    pub w: ScalarMap,
    pub grad_u: Option<VectorMap>,
    pub grad_w: Option<VectorMap>,
    pub xi1: ClassK,
    pub xi2: ClassK,
    /// Growth bound of `W` in the output; required for the fixed-time check.
    pub sigma: Option<ClassK>,
    pub rho: f64,
}

impl std::fmt::Debug for CertCandidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CertCandidate")
            .field("analytic_grad_u", &self.grad_u.is_some())
            .field("analytic_grad_w", &self.grad_w.is_some())
            .field("has_sigma", &self.sigma.is_some())
            .field("rho", &self.rho)
            .finish()
    }
}

impl CertCandidate {
    pub fn new(u: ScalarMap, w: ScalarMap, xi1: ClassK, xi2: ClassK) -> Self {
        Self { u, w, grad_u: None, grad_w: None, xi1, xi2, sigma: None, rho: 0.0 }
    }

    pub fn with_gradients(mut self, grad_u: VectorMap, grad_w: VectorMap) -> Self {
        self.grad_u = Some(grad_u);
        self.grad_w = Some(grad_w);
        self
    }

    pub fn with_growth_bound(mut self, sigma: ClassK, rho: f64) -> Result<Self> {
        if !(rho >= 0.0) {
            return Err(Error::invalid("rho must be nonnegative"));
        }
        self.sigma = Some(sigma);
        self.rho = rho;
        Ok(self)
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        (self.u)(x) + (self.w)(x)
    }

    pub fn gradient_u(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad_u {
            Some(g) => g(x),
            None => central_difference(&*self.u, x),
        }
    }

    pub fn gradient_w(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad_w {
            Some(g) => g(x),
            None => central_difference(&*self.w, x),
        }
    }
}

/// Central differences with step `1e-6·max(1, |x|)`.
pub fn central_difference(g: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 1e-6 * norm.max(1.0);
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

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum RateMode {
    /// `DV·f ≤ −aU^α`, `α ∈ (0, 1)`.
    Ofts { a: f64, alpha: f64 },
    /// `DV·f ≤ −a₁U^{α₁} − a₂U^{α₂}`, `α₁ ∈ (0, 1)`, `α₂ > 1`.
    Ofxts { a1: f64, a2: f64, alpha1: f64, alpha2: f64 },
}

pub type SampleRates = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Rate constants. `b` may be replaced by a per-sample rule (a bound that
/// depends on the sample taken as initial condition).
#[derive(Clone)]
pub struct RateParams {
    mode: RateMode,
    b: Vec<f64>,
    beta: Vec<f64>,
    b_rule: Option<SampleRates>,
}

impl std::fmt::Debug for RateParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateParams")
            .field("mode", &self.mode)
            .field("b", &self.b)
            .field("beta", &self.beta)
            .field("per_sample_b", &self.b_rule.is_some())
            .finish()
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{what} must be positive, got {v}")));
    }
    Ok(())
}

fn check_cross_terms(b: &[f64], beta: &[f64]) -> Result<()> {
    if b.len() != beta.len() {
        return Err(Error::invalid("b and beta must have equal lengths"));
    }
    for &bi in b {
        positive(bi, "b_i")?;
    }
    Ok(())
}

impl RateParams {
    pub fn ofts(a: f64, alpha: f64, b: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        positive(a, "a")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        check_cross_terms(&b, &beta)?;
        if let Some(bad) = beta.iter().find(|&&bt| !(bt > alpha)) {
            return Err(Error::invalid(format!("every beta must exceed alpha = {alpha}, got {bad}")));
        }
        Ok(Self { mode: RateMode::Ofts { a, alpha }, b, beta, b_rule: None })
    }

    pub fn ofxts(a1: f64, a2: f64, alpha1: f64, alpha2: f64, b: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        positive(a1, "a1")?;
        positive(a2, "a2")?;
        if !(alpha1 > 0.0 && alpha1 < 1.0) {
            return Err(Error::invalid(format!("alpha1 must lie in (0, 1), got {alpha1}")));
        }
        if !(alpha2 > 1.0 && alpha2.is_finite()) {
            return Err(Error::invalid(format!("alpha2 must exceed 1, got {alpha2}")));
        }
        check_cross_terms(&b, &beta)?;
        if let Some(bad) = beta.iter().find(|&&bt| !(bt > alpha1 && bt < alpha2)) {
            return Err(Error::invalid(format!("every beta must lie in ({alpha1}, {alpha2}), got {bad}")));
        }
        Ok(Self { mode: RateMode::Ofxts { a1, a2, alpha1, alpha2 }, b, beta, b_rule: None })
    }

    /// Evaluates `b` per sample; each returned vector must match `beta` in length.
    pub fn with_sample_dependent_b(mut self, rule: SampleRates) -> Self {
        self.b_rule = Some(rule);
        self
    }

    pub fn mode(&self) -> RateMode {
        self.mode
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn b_at(&self, x: &[f64]) -> Vec<f64> {
        match &self.b_rule {
            Some(rule) => rule(x),
            None => self.b.clone(),
        }
    }

    fn cross_bound(&self, b: &[f64], u: f64) -> f64 {
        b.iter().zip(&self.beta).map(|(bi, be)| bi * u.powf(*be)).sum()
    }

    /// Copy with `b` replaced by constants (used for uniform upper bounds).
    pub fn with_constant_b(&self, b: Vec<f64>) -> Result<Self> {
        check_cross_terms(&b, &self.beta)?;
        Ok(Self { mode: self.mode, b, beta: self.beta.clone(), b_rule: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    pub name: String,
    pub worst_margin: f64,
    pub worst_sample: Option<Vec<f64>>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub mode: String,
    pub samples_used: usize,
    pub samples_excluded: usize,
    pub conditions: Vec<ConditionMargin>,
    /// First violating sample in input order, with the condition it breaks.
    pub first_violation: Option<(String, Vec<f64>)>,
    pub bounds: Vec<NamedValue>,
    pub verdict: Verdict,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionMargin> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn bound(&self, name: &str) -> Option<f64> {
        self.bounds.iter().find(|b| b.name == name).map(|b| b.value)
    }

    pub fn total_violations(&self) -> usize {
        self.conditions.iter().map(|c| c.violations).sum()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates the margins of every condition at one sample, in `names` order.
fn sample_margins(sys: &SystemModel, cand: &CertCandidate, rates: &RateParams, x: &[f64]) -> Vec<f64> {
    let f = sys.rhs(x);
    let hy = norm(&sys.output(x));
    let u = (cand.u)(x);
    let w = (cand.w)(x);
    let du = dot(&cand.gradient_u(x), &f);
    let dw = dot(&cand.gradient_w(x), &f);
    let dv = du + dw;
    let b = rates.b_at(x);
    let mut m = vec![
        u - (cand.xi1)(hy) + MARGIN_SLACK,
        (cand.xi2)(hy) - u + MARGIN_SLACK,
        w + MARGIN_SLACK,
    ];
    match rates.mode {
        RateMode::Ofts { a, alpha } => m.push(-a * u.powf(alpha) - dv + MARGIN_SLACK),
        RateMode::Ofxts { a1, a2, alpha1, alpha2 } => {
            m.push(-a1 * u.powf(alpha1) - a2 * u.powf(alpha2) - dv + MARGIN_SLACK)
        }
    }
    m.push(rates.cross_bound(&b, u) - dw.abs() + MARGIN_SLACK);
    if let (RateMode::Ofxts { .. }, Some(sigma)) = (rates.mode, &cand.sigma) {
        m.push(sigma(cand.rho + hy) - w + MARGIN_SLACK);
    }
    m
}

fn condition_names(rates: &RateParams) -> Vec<&'static str> {
    let mut names = vec!["output_sandwich_lower", "output_sandwich_upper", "w_nonnegative"];
    match rates.mode {
        RateMode::Ofts { .. } => names.extend(["decay", "cross_term"]),
        RateMode::Ofxts { .. } => names.extend(["two_rate_decay", "cross_term", "w_growth"]),
    }
    names
}

fn audit(sys: &SystemModel, cand: &CertCandidate, rates: &RateParams, samples: &[Vec<f64>]) -> Result<CertificationReport> {
    if samples.is_empty() {
        return Err(Error::invalid("certification needs at least one sample"));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != sys.state_dim()) {
        return Err(Error::invalid(format!("sample of length {} for a {}-state system", bad.len(), sys.state_dim())));
    }
    let names = condition_names(rates);
    let kept: Vec<&Vec<f64>> = samples.iter().filter(|x| norm(&sys.output(x)) > OUTPUT_EXCLUSION).collect();
    let margins: Vec<Vec<f64>> = kept.par_iter().map(|x| sample_margins(sys, cand, rates, x)).collect();

    let mut conditions: Vec<ConditionMargin> = names
        .iter()
        .map(|n| ConditionMargin { name: n.to_string(), worst_margin: f64::INFINITY, worst_sample: None, violations: 0 })
        .collect();
    let mut first_violation = None;
    for (x, ms) in kept.iter().zip(&margins) {
        for (c, &m) in conditions.iter_mut().zip(ms) {
            // NaN margins count as violations
            let violated = !(m >= 0.0);
            if violated {
                c.violations += 1;
                if first_violation.is_none() {
                    first_violation = Some((c.name.clone(), (*x).clone()));
                }
            }
            if violated && c.worst_margin >= 0.0 || m < c.worst_margin || c.worst_sample.is_none() {
                c.worst_margin = if m.is_nan() { f64::NEG_INFINITY } else { m };
                c.worst_sample = Some((*x).clone());
            }
        }
    }
    let verdict = if !kept.is_empty() && conditions.iter().all(|c| c.violations == 0) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mode = match rates.mode {
        RateMode::Ofts { .. } => "ofts",
        RateMode::Ofxts { .. } => "ofxts",
    };
    Ok(CertificationReport {
        mode: mode.into(),
        samples_used: kept.len(),
        samples_excluded: samples.len() - kept.len(),
        conditions,
        first_violation,
        bounds: Vec::new(),
        verdict,
    })
}

/// Output finite-time conditions. The report carries the level `U*` below which
/// the cross term costs at most half the decay (largest `b` over the samples).
pub fn check_ofts(
    sys: &SystemModel,
    cand: &CertCandidate,
    rates: &RateParams,
    samples: &[Vec<f64>],
) -> Result<CertificationReport> {
    if !matches!(rates.mode, RateMode::Ofts { .. }) {
        return Err(Error::invalid("check_ofts needs finite-time rate parameters"));
    }
    let mut report = audit(sys, cand, rates, samples)?;
    if let Some(b) = uniform_b(rates, samples) {
        if let Ok(level) = half_decay_level(&rates.with_constant_b(b)?) {
            report.bounds.push(NamedValue { name: "half_decay_level".into(), value: level });
        }
    }
    Ok(report)
}

/// Output fixed-time conditions, with the fixed-time settling bound computed
/// from the rate thresholds when the candidate supplies `σ`.
pub fn check_ofxts(
    sys: &SystemModel,
    cand: &CertCandidate,
    rates: &RateParams,
    samples: &[Vec<f64>],
) -> Result<CertificationReport> {
    let RateMode::Ofxts { a1, a2, alpha1, alpha2 } = rates.mode else {
        return Err(Error::invalid("check_ofxts needs fixed-time rate parameters"));
    };
    let Some(sigma) = cand.sigma.clone() else {
        return Err(Error::invalid("check_ofxts needs a growth bound sigma on the candidate"));
    };
    let mut report = audit(sys, cand, rates, samples)?;
    let Some(b) = uniform_b(rates, samples) else { return Ok(report) };
    let (ut1, ut2) = find_rate_thresholds(&rates.with_constant_b(b)?, THRESHOLD_CAP)?;
    let xi1_inv = invert_class_k(&*cand.xi1, ut1)?;
    let k1 = ut1 + sigma(cand.rho + xi1_inv);
    let k2 = a1 * ut2.powf(alpha1) + a2 * ut2.powf(alpha2);
    let total = output_fixed_time_bound(ut1, ut2, a1, a2, alpha1, alpha2, k1, k2)?;
    for (name, value) in [("u_tau1", ut1), ("u_tau2", ut2), ("k1", k1), ("k2", k2), ("settling_time_bound", total)] {
        report.bounds.push(NamedValue { name: name.into(), value });
    }
    Ok(report)
}

fn uniform_b(rates: &RateParams, samples: &[Vec<f64>]) -> Option<Vec<f64>> {
    if rates.b_rule.is_none() {
        return Some(rates.b.clone());
    }
    let mut acc = vec![0.0; rates.beta.len()];
    for x in samples {
        for (a, v) in acc.iter_mut().zip(rates.b_at(x)) {
            *a = f64::max(*a, v);
        }
    }
    acc.iter().all(|v| *v > 0.0 && v.is_finite()).then_some(acc)
}

/// `ξ⁻¹(y)` for a class-K∞ function by bracketing and bisection.
pub fn invert_class_k(xi: &(dyn Fn(f64) -> f64 + Send + Sync), y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while xi(hi) < y {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NumericalFailure { message: "class-K function does not reach the target".into(), bracket: (0.0, hi) });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if xi(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

// ---------------------------------------------------------------------------
// closed-form settling-time bounds

fn unit_interval(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("{what} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn above_one(v: f64, what: &str) -> Result<()> {
    if !(v > 1.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{what} must exceed 1, got {v}")));
    }
    Ok(())
}

fn nonnegative(v: f64, what: &str) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{what} must be nonnegative, got {v}")));
    }
    Ok(())
}

/// Settling time of `V̇ ≤ −cV^μ`, `μ ∈ (0, 1)`: `V₀^{1−μ}/(c(1−μ))`.
pub fn finite_time_bound(v0: f64, c: f64, mu: f64) -> Result<f64> {
    nonnegative(v0, "V0")?;
    positive(c, "c")?;
    unit_interval(mu, "mu")?;
    Ok(v0.powf(1.0 - mu) / (c * (1.0 - mu)))
}

/// Time for `V̇ ≤ −cV^μ`, `μ > 1`, to bring any `V₀` below `ε`:
/// `1/(c(μ − 1)ε^{μ−1})`.
pub fn set_attraction_bound(c: f64, mu: f64, eps: f64) -> Result<f64> {
    positive(c, "c")?;
    above_one(mu, "mu")?;
    positive(eps, "eps")?;
    Ok(1.0 / (c * (mu - 1.0) * eps.powf(mu - 1.0)))
}

/// Settling time of `V̇ ≤ −k₁V^μ − k₂V^ν`, `μ ∈ (0,1)`, `ν > 1`, uniform in `V₀`:
/// `1/(k₁(1 − μ)) + 1/(k₂(ν − 1))`.
pub fn fixed_time_bound(k1: f64, mu: f64, k2: f64, nu: f64) -> Result<f64> {
    positive(k1, "k1")?;
    positive(k2, "k2")?;
    unit_interval(mu, "mu")?;
    above_one(nu, "nu")?;
    Ok(1.0 / (k1 * (1.0 - mu)) + 1.0 / (k2 * (nu - 1.0)))
}

/// Output settling bound once the cross term is dominated from time `τ` on:
/// `τ + U_τ^{1−α}/(0.5a(1 − α))`.
pub fn output_finite_time_bound(tau: f64, u_tau: f64, a: f64, alpha: f64) -> Result<f64> {
    nonnegative(tau, "tau")?;
    nonnegative(u_tau, "U_tau")?;
    positive(a, "a")?;
    unit_interval(alpha, "alpha")?;
    Ok(tau + u_tau.powf(1.0 - alpha) / (0.5 * a * (1.0 - alpha)))
}

/// Uniform output settling bound:
/// `1/(0.5a₂(α₂−1)U_{τ₁}^{α₂−1}) + U_{τ₂}^{1−α₁}/(0.5a₁(1−α₁)) + (k₁ − U_{τ₂})/k₂`.
#[allow(clippy::too_many_arguments)]
pub fn output_fixed_time_bound(
    u_tau1: f64,
    u_tau2: f64,
    a1: f64,
    a2: f64,
    alpha1: f64,
    alpha2: f64,
    k1: f64,
    k2: f64,
) -> Result<f64> {
    positive(u_tau1, "U_tau1")?;
    nonnegative(u_tau2, "U_tau2")?;
    positive(a1, "a1")?;
    positive(a2, "a2")?;
    positive(k2, "k2")?;
    unit_interval(alpha1, "alpha1")?;
    above_one(alpha2, "alpha2")?;
    if u_tau2 > u_tau1 {
        return Err(Error::invalid(format!("U_tau2 = {u_tau2} exceeds U_tau1 = {u_tau1}")));
    }
    if !(k1 >= u_tau2) {
        return Err(Error::invalid(format!("k1 = {k1} is below U_tau2 = {u_tau2}")));
    }
    Ok(1.0 / (0.5 * a2 * (alpha2 - 1.0) * u_tau1.powf(alpha2 - 1.0))
        + u_tau2.powf(1.0 - alpha1) / (0.5 * a1 * (1.0 - alpha1))
        + (k1 - u_tau2) / k2)
}

// ---------------------------------------------------------------------------
// rate thresholds

/// Default cap returned for thresholds that are unbounded.
pub const THRESHOLD_CAP: f64 = 1e12;
const SCAN_LO: f64 = 1e-12;
const SCAN_POINTS: usize = 4000;

fn bisect_sign_change<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, lo_side: F) -> (f64, f64) {
    // invariant: lo_side(lo) && !lo_side(hi)
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if lo_side(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi <= lo * (1.0 + 1e-14) {
            break;
        }
    }
    (lo, hi)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Thresholds `(U_{τ₁}, U_{τ₂})` of the fixed-time argument:
///
/// - above `U_{τ₁}` the cross term costs at most half the fast decay:
///   `p(U) = −a₁U^{α₁} − ½a₂U^{α₂} + Σ bᵢU^{βᵢ} < 0`;
/// - on `(0, U_{τ₂}]` it costs at most half the slow decay:
///   `q(U) = −½a₁U^{α₁} − a₂U^{α₂} + Σ bᵢU^{βᵢ} ≤ 0`.
///
/// Located by a log-grid scan over `[1e-12, cap]` refined by bisection;
/// `U_{τ₂}` is capped at `U_{τ₁}`. With no cross terms both equal `cap`.
pub fn find_rate_thresholds(rates: &RateParams, cap: f64) -> Result<(f64, f64)> {
    let RateMode::Ofxts { a1, a2, alpha1, alpha2 } = rates.mode else {
        return Err(Error::invalid("rate thresholds need fixed-time rate parameters"));
    };
    positive(cap, "cap")?;
    if rates.b.is_empty() {
        return Ok((cap, cap));
    }
    let cross = |u: f64| rates.cross_bound(&rates.b, u);
    let p = |u: f64| -a1 * u.powf(alpha1) - 0.5 * a2 * u.powf(alpha2) + cross(u);
    let q = |u: f64| -0.5 * a1 * u.powf(alpha1) - a2 * u.powf(alpha2) + cross(u);
    let grid = log_grid(SCAN_LO.min(cap * 0.5), cap, SCAN_POINTS);

    if p(cap) >= 0.0 {
        return Err(Error::Infeasible(format!("cross term dominates the fast decay up to the cap {cap:e}")));
    }
    let ut1 = match grid.iter().rposition(|&u| p(u) >= 0.0) {
        None => cap,
        Some(i) => bisect_sign_change(grid[i], grid[i + 1], |u| p(u) >= 0.0).1,
    };
    if q(grid[0]) > 0.0 {
        return Err(Error::Infeasible("cross term dominates the slow decay near zero".into()));
    }
    let ut2 = match grid.iter().position(|&u| q(u) > 0.0) {
        None => cap,
        Some(i) => bisect_sign_change(grid[i - 1], grid[i], |u| q(u) <= 0.0).0,
    };
    Ok((ut1, ut2.min(ut1)))
}

/// Largest `U*` with `Σ bᵢU*^{βᵢ−α} ≤ ½a`, below which the cross term costs at
/// most half the finite-time decay.
pub fn half_decay_level(rates: &RateParams) -> Result<f64> {
    let RateMode::Ofts { a, alpha } = rates.mode else {
        return Err(Error::invalid("half-decay level needs finite-time rate parameters"));
    };
    if rates.b.is_empty() {
        return Ok(THRESHOLD_CAP);
    }
    let g = |u: f64| rates.b.iter().zip(&rates.beta).map(|(b, be)| b * u.powf(be - alpha)).sum::<f64>() - 0.5 * a;
    if g(THRESHOLD_CAP) <= 0.0 {
        return Ok(THRESHOLD_CAP);
    }
    if g(SCAN_LO) > 0.0 {
        return Err(Error::Infeasible("cross term dominates the decay near zero".into()));
    }
    Ok(bisect_sign_change(SCAN_LO, THRESHOLD_CAP, |u| g(u) <= 0.0).0)
}

/// Evaluates the finite-time output bound along a simulated trajectory: `τ` is
/// the first sample time after which `U ≤ U*` for the rest of the run, with
/// `b` taken at the initial state. Returns `(τ, U_τ, bound)`.
pub fn output_finite_time_bound_along(
    states: &[Vec<f64>],
    times: &[f64],
    cand: &CertCandidate,
    rates: &RateParams,
) -> Result<(f64, f64, f64)> {
    let RateMode::Ofts { a, alpha } = rates.mode else {
        return Err(Error::invalid("needs finite-time rate parameters"));
    };
    if states.is_empty() || states.len() != times.len() {
        return Err(Error::invalid("states and times must be nonempty and of equal length"));
    }
    let level = half_decay_level(&rates.with_constant_b(rates.b_at(&states[0]))?)?;
    let us: Vec<f64> = states.iter().map(|x| (cand.u)(x)).collect();
    let k = match us.iter().rposition(|&u| u > level) {
        None => 0,
        Some(i) if i + 1 < us.len() => i + 1,
        Some(_) => return Err(Error::Infeasible("U stays above the half-decay level".into())),
    };
    let bound = output_finite_time_bound(times[k], us[k], a, alpha)?;
    Ok((times[k], us[k], bound))
}

// ---------------------------------------------------------------------------
// sampling and built-in candidates

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `count` Halton points in the box `[−half_width, half_width]^dim` (dim ≤ 8),
/// skipping the first point (the box center).
pub fn halton_box(dim: usize, count: usize, half_width: f64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || dim > PRIMES.len() {
        return Err(Error::invalid("Halton sampling supports 1 ≤ dim ≤ 8"));
    }
    positive(half_width, "half_width")?;
    Ok((1..=count as u64)
        .map(|i| (0..dim).map(|d| half_width * (2.0 * radical_inverse(i, PRIMES[d]) - 1.0)).collect())
        .collect())
}

/// Quasi-random samples of the box `|xᵢ| ≤ 2` used by the built-in audits.
pub fn default_samples(dim: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    halton_box(dim, count, 2.0)
}

pub const DEFAULT_SAMPLE_COUNT: usize = 10_000;

/// A system with its certificate for a named example.
#[derive(Debug, Clone)]
pub struct BuiltinCertificate {
    pub system: SystemModel,
    pub candidate: CertCandidate,
    pub rates: RateParams,
}

impl BuiltinCertificate {
    pub fn check(&self, samples: &[Vec<f64>]) -> Result<CertificationReport> {
        match self.rates.mode() {
            RateMode::Ofts { .. } => check_ofts(&self.system, &self.candidate, &self.rates, samples),
            RateMode::Ofxts { .. } => check_ofxts(&self.system, &self.candidate, &self.rates, samples),
        }
    }
}

fn power_k(p: f64) -> ClassK {
    Arc::new(move |s: f64| s.powf(p))
}

fn u_abs15() -> (ScalarMap, VectorMap) {
    (
        Arc::new(|x: &[f64]| x[0].abs().powf(1.5)),
        Arc::new(|x: &[f64]| vec![1.5 * spow(x[0], 0.5), 0.0]),
    )
}

/// `U = |x₁|^{1.5}`, `W = 0.75x₂²`, `a = 1.5`, `α = 2/3`, `β₁ = 1`, `b₁ = 2V(x)`
/// evaluated at each sample taken as initial condition.
pub fn example1_certificate() -> Result<BuiltinCertificate> {
    let (u, gu) = u_abs15();
    let w: ScalarMap = Arc::new(|x: &[f64]| 0.75 * x[1] * x[1]);
    let gw: VectorMap = Arc::new(|x: &[f64]| vec![0.0, 1.5 * x[1]]);
    let candidate = CertCandidate::new(u, w, power_k(1.5), power_k(1.5)).with_gradients(gu, gw);
    let v = candidate.clone();
    let rates = RateParams::ofts(1.5, 2.0 / 3.0, vec![1.0], vec![1.0])?
        .with_sample_dependent_b(Arc::new(move |x: &[f64]| vec![2.0 * v.v(x)]));
    Ok(BuiltinCertificate { system: example1_system(), candidate, rates })
}

/// `U = |x₁|^{1.5}`, `W = 3(1 + cos x₂)`, `a₁ = a₂ = 1.5`, `α₁ = 2/3`,
/// `α₂ = 5/3`, `b₁ = 6`, `β₁ = 1`, `σ = id`, `ρ = 6`.
pub fn example2_certificate() -> Result<BuiltinCertificate> {
    let (u, gu) = u_abs15();
    let w: ScalarMap = Arc::new(|x: &[f64]| 3.0 * (1.0 + x[1].cos()));
    let gw: VectorMap = Arc::new(|x: &[f64]| vec![0.0, -3.0 * x[1].sin()]);
    let candidate = CertCandidate::new(u, w, power_k(1.5), power_k(1.5))
        .with_gradients(gu, gw)
        .with_growth_bound(Arc::new(|s: f64| s), 6.0)?;
    let rates = RateParams::ofxts(1.5, 1.5, 2.0 / 3.0, 5.0 / 3.0, vec![6.0], vec![1.0])?;
    Ok(BuiltinCertificate { system: example2_system(), candidate, rates })
}

pub fn builtin_certificate(name: &str) -> Result<BuiltinCertificate> {
    match name {
        "example1" => example1_certificate(),
        "example2" => example2_certificate(),
        other => Err(Error::Usage(format!("no certificate for '{other}' (known: example1, example2)"))),
    }
}
