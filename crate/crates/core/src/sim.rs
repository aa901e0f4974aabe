//! Fixed-step integration of closed-loop fields, settling-time detection and
//! batch runs over sets of initial conditions.
//!
//! Right-hand sides are allowed to be non-Lipschitz at the origin. Explicit
//! steps chatter at step scale there, so once the regulated components fall
//! within `origin_stop_eps` they are pinned to exactly zero for the rest of the
//! run (the origin is absorbing).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub horizon: f64,
    pub method: Method,
    pub origin_stop_eps: f64,
    /// Keep every `record_every`-th step in recorded trajectories (the final
    /// step is always kept). Settling detection on recorded trajectories works at
    /// this resolution.
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 1e-4, horizon: 10.0, method: Method::Rk4, origin_stop_eps: 1e-9, record_every: 1 }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        let cfg = Self { dt, horizon, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_origin_stop(mut self, eps: f64) -> Self {
        self.origin_stop_eps = eps;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon {} must exceed dt {}", self.horizon, self.dt)));
        }
        if !(self.origin_stop_eps >= 0.0) {
            return Err(Error::invalid("origin_stop_eps must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the last grid time is `steps·dt ≈ horizon`.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }
}

/// Sampled solution. States and outputs are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    state_names: Vec<String>,
    state_dim: usize,
    output_dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    outputs: Vec<f64>,
    controls: Option<Vec<f64>>,
}

impl Trajectory {
    fn empty(sys: &SystemModel) -> Self {
        let n = sys.state_dim();
        let clamp = sys.clamp_components();
        let state_names = (0..n)
            .map(|i| {
                if clamp.start == 0 && clamp.end < n && i >= clamp.end {
                    format!("w{}", i - clamp.end + 1)
                } else {
                    format!("x{}", i + 1)
                }
            })
            .collect();
        Self {
            state_names,
            state_dim: n,
            output_dim: sys.output_dim(),
            times: Vec::new(),
            states: Vec::new(),
            outputs: Vec::new(),
            controls: sys.has_control().then(Vec::new),
        }
    }

    fn push(&mut self, sys: &SystemModel, t: f64, x: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.outputs.extend(sys.output(x));
        if let Some(c) = self.controls.as_mut() {
            c.push(sys.control(x).unwrap_or(f64::NAN));
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.state_dim..(k + 1) * self.state_dim]
    }

    pub fn output(&self, k: usize) -> &[f64] {
        &self.outputs[k * self.output_dim..(k + 1) * self.output_dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.state_dim)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &[f64]> {
        self.outputs.chunks(self.output_dim)
    }

    pub fn controls(&self) -> Option<&[f64]> {
        self.controls.as_deref()
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Column headers: `t, x1..xn (w1..wm for adaptation states), y1..yp[, u]`.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(self.state_names.iter().cloned());
        h.extend((1..=self.output_dim).map(|i| format!("y{i}")));
        if self.controls.is_some() {
            h.push("u".into());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let last = self.len().saturating_sub(1);
        for k in (0..self.len()).filter(|k| k % stride == 0 || *k == last) {
            let mut row: Vec<String> = Vec::with_capacity(1 + self.state_dim + self.output_dim + 1);
            row.push(self.times[k].to_string());
            row.extend(self.state(k).iter().map(f64::to_string));
            row.extend(self.output(k).iter().map(f64::to_string));
            if let Some(c) = &self.controls {
                row.push(c[k].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, stride: usize) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), stride)
    }
}

fn step(sys: &SystemModel, x: &[f64], dt: f64, method: Method) -> Vec<f64> {
    match method {
        Method::Euler => {
            let k1 = sys.rhs(x);
            x.iter().zip(&k1).map(|(xi, ki)| xi + dt * ki).collect()
        }
        Method::Rk4 => {
            let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect() };
            let k1 = sys.rhs(x);
            let k2 = sys.rhs(&axpy(0.5 * dt, &k1));
            let k3 = sys.rhs(&axpy(0.5 * dt, &k2));
            let k4 = sys.rhs(&axpy(dt, &k3));
            (0..x.len())
                .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect()
        }
    }
}

/// Drives the integration, handing each grid point to `observe(k, t, x)`.
/// Returns the blow-up time if a non-finite state appears.
fn drive<F: FnMut(usize, f64, &[f64])>(
    sys: &SystemModel,
    x0: &[f64],
    cfg: &IntegratorConfig,
    mut observe: F,
) -> Result<Option<f64>> {
    cfg.validate()?;
    if x0.len() != sys.state_dim() {
        return Err(Error::invalid(format!(
            "{}: initial state has length {}, expected {}",
            sys.name(),
            x0.len(),
            sys.state_dim()
        )));
    }
    let clamp = sys.clamp_components();
    let mut clamped = false;
    let pin = |x: &mut [f64], clamped: &mut bool| {
        if !*clamped {
            let r2: f64 = x[clamp.clone()].iter().map(|v| v * v).sum();
            *clamped = r2.sqrt() <= cfg.origin_stop_eps;
        }
        if *clamped {
            x[clamp.clone()].iter_mut().for_each(|v| *v = 0.0);
        }
    };
    let mut x = x0.to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    pin(&mut x, &mut clamped);
    observe(0, 0.0, &x);
    let steps = cfg.steps();
    for k in 1..=steps {
        let t = k as f64 * cfg.dt;
        let mut next = step(sys, &x, cfg.dt, cfg.method);
        if next.iter().any(|v| !v.is_finite()) {
            return Ok(Some(t));
        }
        pin(&mut next, &mut clamped);
        x = next;
        observe(k, t, &x);
    }
    Ok(None)
}

/// A recorded run that may have stopped early.
#[derive(Debug, Clone)]
pub struct IntegrationOutcome {
    pub trajectory: Trajectory,
    /// First step time at which the state became non-finite.
    pub diverged_at: Option<f64>,
}

/// Integrates and records, keeping the partial trajectory on divergence.
pub fn integrate_recording(sys: &SystemModel, x0: &[f64], cfg: &IntegratorConfig) -> Result<IntegrationOutcome> {
    let mut traj = Trajectory::empty(sys);
    let steps = cfg.steps();
    let every = cfg.record_every.max(1);
    let mut last_pushed = None;
    let mut last = (0.0, Vec::new(), 0usize);
    let diverged_at = drive(sys, x0, cfg, |k, t, x| {
        if k % every == 0 || k == steps {
            traj.push(sys, t, x);
            last_pushed = Some(k);
        } else {
            last = (t, x.to_vec(), k);
        }
    })?;
    // keep the last finite state even when it is off the recording stride
    if diverged_at.is_some() && !last.1.is_empty() && last_pushed.is_some_and(|p| p < last.2) {
        traj.push(sys, last.0, &last.1);
    }
    Ok(IntegrationOutcome { trajectory: traj, diverged_at })
}

/// Integrates over `[0, horizon]`; divergence is an error carrying the blow-up time.
pub fn integrate(sys: &SystemModel, x0: &[f64], cfg: &IntegratorConfig) -> Result<Trajectory> {
    let out = integrate_recording(sys, x0, cfg)?;
    match out.diverged_at {
        Some(time) => Err(Error::Divergence { time }),
        None => Ok(out.trajectory),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettlingEstimate {
    pub settled: bool,
    /// First grid time after which every remaining output sample has norm `≤ eps`.
    pub t_settle: Option<f64>,
    pub eps: f64,
    pub dwell: f64,
}

/// Streaming form of [`detect_settling`]: tracks the last sample that violates
/// the bound.
#[derive(Debug, Clone)]
struct SettlingTracker {
    eps: f64,
    last_violation_next: Option<Option<f64>>,
    first_time: Option<f64>,
    pending_next: bool,
    end_time: f64,
}

impl SettlingTracker {
    fn new(eps: f64) -> Self {
        Self { eps, last_violation_next: None, first_time: None, pending_next: false, end_time: 0.0 }
    }

    fn observe(&mut self, t: f64, y: &[f64]) {
        if self.first_time.is_none() {
            self.first_time = Some(t);
        }
        if self.pending_next {
            // the sample after the latest violation
            self.last_violation_next = Some(Some(t));
            self.pending_next = false;
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= self.eps) {
            self.last_violation_next = Some(None);
            self.pending_next = true;
        }
        self.end_time = t;
    }

    fn finish(&self, dwell: f64) -> SettlingEstimate {
        let t_settle = match self.last_violation_next {
            None => self.first_time,
            Some(next) => next,
        };
        let settled = t_settle.is_some_and(|t| t <= self.end_time - dwell);
        SettlingEstimate { settled, t_settle, eps: self.eps, dwell }
    }
}

fn check_settling_args(eps: f64, dwell: f64) -> Result<()> {
    if !(eps > 0.0) || !(dwell > 0.0) {
        return Err(Error::invalid("eps and dwell must be positive"));
    }
    Ok(())
}

/// `t_settle` is the first grid time from which all remaining output samples
/// satisfy `|y| ≤ eps`; the run counts as settled when that leaves at least
/// `dwell` of confirmed rest before the end of the trajectory.
pub fn detect_settling(traj: &Trajectory, eps: f64, dwell: f64) -> Result<SettlingEstimate> {
    check_settling_args(eps, dwell)?;
    let mut tr = SettlingTracker::new(eps);
    for (k, y) in traj.outputs().enumerate() {
        tr.observe(traj.times[k], y);
    }
    Ok(tr.finish(dwell))
}

/// Integrates and detects settling without storing the trajectory. A diverging
/// run is an error.
pub fn simulate_settling(
    sys: &SystemModel,
    x0: &[f64],
    cfg: &IntegratorConfig,
    eps: f64,
    dwell: f64,
) -> Result<SettlingEstimate> {
    check_settling_args(eps, dwell)?;
    if dwell >= cfg.horizon {
        return Err(Error::invalid("dwell must be shorter than the horizon"));
    }
    let mut tr = SettlingTracker::new(eps);
    let diverged = drive(sys, x0, cfg, |_, t, x| tr.observe(t, &sys.output(x)))?;
    match diverged {
        Some(time) => Err(Error::Divergence { time }),
        None => Ok(tr.finish(dwell)),
    }
}

/// One settling estimate per initial condition, computed in parallel and
/// returned in input order. Per-run failures are reported in place.
pub fn batch_settling(
    sys: &SystemModel,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    eps: f64,
    dwell: f64,
) -> Result<Vec<Result<SettlingEstimate>>> {
    if x0s.is_empty() {
        return Err(Error::invalid("batch needs at least one initial condition"));
    }
    cfg.validate()?;
    Ok(x0s.par_iter().map(|x0| simulate_settling(sys, x0, cfg, eps, dwell)).collect())
}

/// Like [`batch_settling`] but with a system built per initial condition.
pub fn batch_settling_with<F>(
    factory: F,
    x0s: &[Vec<f64>],
    cfg: &IntegratorConfig,
    eps: f64,
    dwell: f64,
) -> Result<Vec<Result<SettlingEstimate>>>
where
    F: Fn(&[f64]) -> Result<SystemModel> + Sync,
{
    if x0s.is_empty() {
        return Err(Error::invalid("batch needs at least one initial condition"));
    }
    cfg.validate()?;
    Ok(x0s
        .par_iter()
        .map(|x0| factory(x0).and_then(|sys| simulate_settling(&sys, x0, cfg, eps, dwell)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ScalarMap, VectorMap};
    use crate::homogeneity::spow;
    use std::sync::Arc;

    fn scalar(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> SystemModel {
        let rhs: VectorMap = Arc::new(move |x: &[f64]| vec![f(x[0])]);
        let out: VectorMap = Arc::new(|x: &[f64]| vec![x[0]]);
        SystemModel::new(name, 1, 1, rhs, out).unwrap()
    }

    #[test]
    fn constant_field() {
        let sys = scalar("zero", |_| 0.0);
        let cfg = IntegratorConfig::new(0.1, 1.0).unwrap();
        let tr = integrate(&sys, &[5.0], &cfg).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.states().all(|x| x[0] == 5.0));
        assert_eq!(tr.times()[0], 0.0);
        assert!(tr.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exponential_decay_rk4() {
        let sys = scalar("decay", |x| -x);
        let cfg = IntegratorConfig::new(1e-3, 1.0).unwrap();
        let tr = integrate(&sys, &[1.0], &cfg).unwrap();
        assert!((tr.final_state()[0] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((tr.horizon() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_step_halving_ratio() {
        let sys = scalar("decay", |x| -x);
        let err = |dt: f64| {
            let cfg = IntegratorConfig::new(dt, 1.0).unwrap();
            (integrate(&sys, &[1.0], &cfg).unwrap().final_state()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn finite_time_comparison_ode() {
        let sys = scalar("sqrt", |v| -spow(v, 0.5));
        let cfg = IntegratorConfig::new(1e-4, 3.0).unwrap();
        let tr = integrate(&sys, &[1.0], &cfg).unwrap();
        for (k, x) in tr.states().enumerate().step_by(997) {
            let t = tr.times()[k];
            let exact = if t < 2.0 { (1.0 - t / 2.0).powi(2) } else { 0.0 };
            assert!((x[0] - exact).abs() < 1e-4, "t={t}: {} vs {exact}", x[0]);
        }
        assert_eq!(tr.final_state()[0], 0.0);
    }

    #[test]
    fn origin_is_absorbing() {
        // chattering relay: without the clamp the state would oscillate around 0
        let sys = scalar("relay", |v| -v.signum());
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap().with_method(Method::Euler).with_origin_stop(1e-2);
        let tr = integrate(&sys, &[0.5], &cfg).unwrap();
        let first_zero = tr.states().position(|x| x[0] == 0.0).unwrap();
        assert!(tr.states().skip(first_zero).all(|x| x[0] == 0.0));
        assert!(tr.outputs().skip(first_zero).all(|y| y[0] == 0.0));
    }

    #[test]
    fn divergence_reports_time() {
        let sys = scalar("blowup", |x| x * x);
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap();
        match integrate(&sys, &[1.0], &cfg) {
            Err(Error::Divergence { time }) => assert!(time > 0.9 && time < 1.1, "{time}"),
            other => panic!("expected divergence, got {other:?}"),
        }
        let out = integrate_recording(&sys, &[1.0], &cfg).unwrap();
        assert!(out.diverged_at.is_some());
        assert!(out.trajectory.states().all(|x| x[0].is_finite()));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1.0).is_err());
        assert!(IntegratorConfig::new(1.0, 0.5).is_err());
        let sys = scalar("zero", |_| 0.0);
        let cfg = IntegratorConfig::new(0.1, 1.0).unwrap();
        assert!(integrate(&sys, &[1.0, 2.0], &cfg).is_err());
    }

    #[test]
    fn settling_examples() {
        let zero = scalar("zero", |_| 0.0);
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap();
        let tr = integrate(&zero, &[0.0], &cfg).unwrap();
        let est = detect_settling(&tr, 1e-3, 0.5).unwrap();
        assert!(est.settled);
        assert_eq!(est.t_settle, Some(0.0));

        // y = max(0, 1 − t)
        let ramp = scalar("ramp", |x| if x > 0.0 { -1.0 } else { 0.0 });
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap().with_method(Method::Euler).with_origin_stop(0.0);
        let tr = integrate(&ramp, &[1.0], &cfg).unwrap();
        let est = detect_settling(&tr, 1e-3, 0.5).unwrap();
        let t = est.t_settle.unwrap();
        assert!((0.999..=1.001).contains(&t), "{t}");
        assert!(est.settled);

        let stream = simulate_settling(&ramp, &[1.0], &cfg, 1e-3, 0.5).unwrap();
        assert_eq!(stream, est);
    }

    #[test]
    fn unsettled_when_last_sample_violates() {
        let sys = scalar("grow", |x| x);
        let cfg = IntegratorConfig::new(1e-2, 1.0).unwrap();
        let tr = integrate(&sys, &[1.0], &cfg).unwrap();
        let est = detect_settling(&tr, 1e-3, 0.1).unwrap();
        assert!(!est.settled);
        assert_eq!(est.t_settle, None);
    }

    #[test]
    fn batch_is_ordered_and_reports_failures() {
        let sys = scalar("blowup", |x| x * x);
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap();
        let x0s = vec![vec![0.0], vec![1.0], vec![-0.1]];
        let res = batch_settling(&sys, &x0s, &cfg, 1e-3, 0.1).unwrap();
        assert_eq!(res.len(), 3);
        assert_eq!(res[0].as_ref().unwrap().t_settle, Some(0.0));
        assert!(matches!(res[1], Err(Error::Divergence { .. })));
        assert!(res[2].is_ok());
        assert!(batch_settling(&sys, &[], &cfg, 1e-3, 0.1).is_err());
    }

    #[test]
    fn csv_layout_and_determinism() {
        let rhs: VectorMap = Arc::new(|x: &[f64]| vec![x[1], -x[0]]);
        let out: VectorMap = Arc::new(|x: &[f64]| vec![x[0]]);
        let u: ScalarMap = Arc::new(|x: &[f64]| -x[0]);
        let sys = SystemModel::new("osc", 2, 1, rhs, out).unwrap().with_control_probe(u);
        let cfg = IntegratorConfig::new(0.01, 0.1).unwrap();
        let tr = integrate(&sys, &[1.0, 0.0], &cfg).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        tr.write_csv(&mut a, 1).unwrap();
        integrate(&sys, &[1.0, 0.0], &cfg).unwrap().write_csv(&mut b, 1).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,y1,u");
        assert_eq!(text.lines().count(), 12);
    }
}
