//! Scenarios: a system, a controller, integration settings and a set of initial
//! conditions, described as a JSON document or picked from the built-in list.
//!
//! Running a scenario writes, under `<out>/<name>/`:
//!
//! - `run_<k>.csv` — one trajectory per initial condition;
//! - `summary.json` — settling estimates, bounds and parameter-estimate histories;
//! - `certification.json` — when certification is enabled and available.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{self, CertificationReport};
use crate::controllers::{
    adaptive_ft_loop, adaptive_fxt_loop, ft_candidate, fxt_candidate, nominal_ft_loop, nominal_fxt_loop, theta_hat,
    FTControllerParams, FixedTimeController, FxTAdaptiveParams,
};
use crate::dynamics::{builtin_system, comparison_system, example3_plant, example4_plant, SystemModel, UncertainPlant};
use crate::error::{Error, Result};
use crate::ilf::{chain_weights, synthesize_lmi, ILFParams, ILFParamsDoc, ILFSolveConfig, IlfController};
use crate::sim::{detect_settling, integrate_recording, IntegratorConfig, Method, Trajectory};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OUTSTAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "outstab-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Autonomous built-in system (`example1`, `example2`).
    Builtin { name: String },
    /// Uncertain plant (`example3-plant`, `example4-plant`) with its true parameters.
    Plant { name: String, theta: Vec<f64> },
    /// `V̇ = −Σ cᵢ⌈V⌋^{μᵢ}`.
    Comparison { terms: Vec<ComparisonTerm> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonTerm {
    pub c: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Autonomous systems only.
    None,
    /// `u = u_FTS(x)`.
    Fts { alpha: f64 },
    /// `u = u_FTS − φᵀω` with gradient adaptation. `validate = false` admits
    /// tunings for which `V` is not a strict Lyapunov function.
    AdaptiveFt {
        alpha: f64,
        l: f64,
        s: f64,
        gamma: f64,
        #[serde(default = "yes")]
        validate: bool,
    },
    /// Implicit-Lyapunov fixed-time feedback; parameters are synthesized from
    /// `seed` unless given.
    Ilf {
        nu1: f64,
        nu2: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: Option<ILFParamsDoc>,
    },
    /// ILF feedback plus the arctan-parameterized adaptation.
    AdaptiveIlf {
        nu1: f64,
        nu2: f64,
        theta_max: f64,
        gamma: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: Option<ILFParamsDoc>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettlingSpec {
    pub eps: f64,
    /// Required rest time at the end of the run; defaults to 5% of the horizon.
    #[serde(default)]
    pub dwell: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub system: SystemSpec,
    pub controller: ControllerSpec,
    pub integrator: IntegratorConfig,
    pub initial_conditions: Vec<Vec<f64>>,
    /// Initial adaptation state for adaptive controllers (zeros when absent).
    #[serde(default)]
    pub initial_adaptation: Option<Vec<f64>>,
    pub settling: SettlingSpec,
    #[serde(default)]
    pub certify: bool,
    /// Write every `csv_stride`-th recorded sample.
    #[serde(default = "one")]
    pub csv_stride: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Usage(format!("scenario document: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Usage(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Usage("name must be a nonempty file-name-safe string".into()));
        }
        if self.initial_conditions.is_empty() {
            return Err(Error::Usage("initial_conditions must not be empty".into()));
        }
        self.integrator.validate().map_err(usage)?;
        if !(self.settling.eps > 0.0) {
            return Err(Error::Usage("settling.eps must be positive".into()));
        }
        if self.settling_dwell() >= self.integrator.horizon {
            return Err(Error::Usage("settling.dwell must be shorter than the horizon".into()));
        }
        let adaptive = matches!(self.controller, ControllerSpec::AdaptiveFt { .. } | ControllerSpec::AdaptiveIlf { .. });
        match (&self.system, &self.controller) {
            (SystemSpec::Builtin { .. } | SystemSpec::Comparison { .. }, ControllerSpec::None) => {}
            (SystemSpec::Builtin { .. } | SystemSpec::Comparison { .. }, _) => {
                return Err(Error::Usage("controller: autonomous systems take controller kind `none`".into()))
            }
            (SystemSpec::Plant { .. }, ControllerSpec::None) => {
                return Err(Error::Usage("controller: a plant needs a controller".into()))
            }
            _ => {}
        }
        if self.initial_adaptation.is_some() && !adaptive {
            return Err(Error::Usage("initial_adaptation applies to adaptive controllers only".into()));
        }
        Ok(())
    }

    pub fn settling_dwell(&self) -> f64 {
        self.settling.dwell.unwrap_or(0.05 * self.integrator.horizon)
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, dt: Option<f64>, horizon: Option<f64>, seed: Option<u64>) -> Result<Self> {
        if let Some(dt) = dt {
            self.integrator.dt = dt;
        }
        if let Some(h) = horizon {
            self.integrator.horizon = h;
        }
        if let Some(s) = seed {
            match &mut self.controller {
                ControllerSpec::Ilf { seed, .. } | ControllerSpec::AdaptiveIlf { seed, .. } => *seed = s,
                _ => {}
            }
        }
        self.validate()?;
        Ok(self)
    }
}

fn usage(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Usage(m),
        other => other,
    }
}

/// Default ILF synthesis seed for the built-in scenarios.
pub const DEFAULT_SEED: u64 = 7;

// ---------------------------------------------------------------------------
// built-ins

struct Builtin {
    name: &'static str,
    description: &'static str,
    make: fn() -> Scenario,
}

fn cfg(dt: f64, horizon: f64, record_every: usize) -> IntegratorConfig {
    IntegratorConfig { dt, horizon, method: Method::Rk4, origin_stop_eps: 1e-9, record_every }
}

fn scaled(base: &[f64], factors: &[f64]) -> Vec<Vec<f64>> {
    factors.iter().map(|k| base.iter().map(|v| v * k).collect()).collect()
}

fn base(name: &str, description: &str, system: SystemSpec, controller: ControllerSpec) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        description: description.into(),
        system,
        controller,
        integrator: cfg(1e-4, 10.0, 1),
        initial_conditions: vec![],
        initial_adaptation: None,
        settling: SettlingSpec { eps: 1e-3, dwell: None },
        certify: false,
        csv_stride: 10,
        output_dir: None,
    }
}

fn example3_adaptive_spec() -> ControllerSpec {
    ControllerSpec::AdaptiveFt { alpha: 0.5, l: 1.0, s: 1.0, gamma: 1.0, validate: false }
}

const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "example1",
        description: "output finite-time system with y = x1; certified with U = |x1|^1.5, W = 0.75 x2^2",
        make: || {
            let mut s = base(
                "example1",
                "output finite-time system, y = x1",
                SystemSpec::Builtin { name: "example1".into() },
                ControllerSpec::None,
            );
            s.initial_conditions = vec![vec![1.0, 1.0], vec![-1.0, 2.0], vec![0.5, -1.5]];
            s.certify = true;
            s
        },
    },
    Builtin {
        name: "example2",
        description: "output fixed-time system with y = x1; certified with U = |x1|^1.5, W = 3(1 + cos x2)",
        make: || {
            let mut s = base(
                "example2",
                "output fixed-time system, y = x1",
                SystemSpec::Builtin { name: "example2".into() },
                ControllerSpec::None,
            );
            s.initial_conditions = vec![vec![1.0, 1.0], vec![-2.0, 0.5], vec![10.0, 3.0]];
            s.certify = true;
            s
        },
    },
    Builtin {
        name: "example3",
        description: "adaptive finite-time control, theta = (3, -2), gamma = l = s = 1, alpha = 0.5",
        make: || {
            let mut s = base(
                "example3",
                "adaptive finite-time control of the uncertain double integrator",
                SystemSpec::Plant { name: "example3-plant".into(), theta: vec![3.0, -2.0] },
                example3_adaptive_spec(),
            );
            s.integrator = cfg(1e-4, 20.0, 1);
            s.initial_conditions = vec![vec![1.0, 1.0], vec![-2.0, 1.0], vec![3.0, -3.0]];
            s
        },
    },
    Builtin {
        name: "example3-noadapt",
        description: "same plant under u_FTS alone; the uncertainty is not compensated",
        make: || {
            let mut s = base(
                "example3-noadapt",
                "finite-time feedback without adaptation",
                SystemSpec::Plant { name: "example3-plant".into(), theta: vec![3.0, -2.0] },
                ControllerSpec::Fts { alpha: 0.5 },
            );
            s.integrator = cfg(1e-4, 20.0, 1);
            s.initial_conditions = vec![vec![1.0, 1.0]];
            s
        },
    },
    Builtin {
        name: "example3-nominal",
        description: "u_FTS on the certain double integrator; settling grows with |x0|",
        make: || {
            let mut s = base(
                "example3-nominal",
                "finite-time (not fixed-time) reference",
                SystemSpec::Plant { name: "example3-plant".into(), theta: vec![0.0, 0.0] },
                ControllerSpec::Fts { alpha: 0.5 },
            );
            s.integrator = cfg(1e-4, 100.0, 10);
            s.initial_conditions = scaled(&[0.0, 1.0], &[1.0, 10.0, 100.0]);
            s.settling = SettlingSpec { eps: 1e-2, dwell: None };
            s
        },
    },
    Builtin {
        name: "example4",
        description: "adaptive fixed-time ILF control, theta = (3, 2), theta_max = 5, nu = (-0.5, 0.5)",
        make: || {
            let mut s = base(
                "example4",
                "adaptive fixed-time control with an implicit Lyapunov function",
                SystemSpec::Plant { name: "example4-plant".into(), theta: vec![3.0, 2.0] },
                ControllerSpec::AdaptiveIlf {
                    nu1: -0.5,
                    nu2: 0.5,
                    theta_max: 5.0,
                    gamma: 1.0,
                    seed: DEFAULT_SEED,
                    params: None,
                },
            );
            s.integrator = cfg(1e-4, 20.0, 10);
            s.initial_conditions = scaled(&[0.0, 1.0], &[1.0, 10.0, 100.0]);
            s.settling = SettlingSpec { eps: 1e-2, dwell: None };
            s
        },
    },
    Builtin {
        name: "example4-nominal",
        description: "ILF fixed-time feedback on the certain double integrator",
        make: || {
            let mut s = base(
                "example4-nominal",
                "fixed-time reference without uncertainty",
                SystemSpec::Plant { name: "example4-plant".into(), theta: vec![0.0, 0.0] },
                ControllerSpec::Ilf { nu1: -0.5, nu2: 0.5, seed: DEFAULT_SEED, params: None },
            );
            s.integrator = cfg(1e-4, 20.0, 10);
            s.initial_conditions = scaled(&[0.0, 1.0], &[1.0, 10.0, 100.0]);
            s.settling = SettlingSpec { eps: 1e-2, dwell: None };
            s
        },
    },
    Builtin {
        name: "comparison-finite-time",
        description: "dV/dt = -V^0.5 from V0 = 1; settles at t = 2",
        make: || {
            let mut s = base(
                "comparison-finite-time",
                "finite-time comparison equation",
                SystemSpec::Comparison { terms: vec![ComparisonTerm { c: 1.0, mu: 0.5 }] },
                ControllerSpec::None,
            );
            s.integrator = cfg(1e-4, 3.0, 1);
            s.initial_conditions = vec![vec![1.0]];
            s.settling = SettlingSpec { eps: 1e-12, dwell: None };
            s
        },
    },
    Builtin {
        name: "comparison-attraction",
        description: "dV/dt = -V^2 from V0 in {1e3, 1e6}; reaches V = 1 before t = 1",
        make: || {
            let mut s = base(
                "comparison-attraction",
                "fixed-time attraction of a level set",
                SystemSpec::Comparison { terms: vec![ComparisonTerm { c: 1.0, mu: 2.0 }] },
                ControllerSpec::None,
            );
            s.integrator = cfg(1e-6, 1.5, 100);
            s.initial_conditions = vec![vec![1e3], vec![1e6]];
            s.settling = SettlingSpec { eps: 1.0, dwell: None };
            s.csv_stride = 1;
            s
        },
    },
    Builtin {
        name: "comparison-fixed-time",
        description: "dV/dt = -V^0.5 - V^2 from V0 in {1, 1e3, 1e6}; settles before t = 3",
        make: || {
            let mut s = base(
                "comparison-fixed-time",
                "fixed-time comparison equation",
                SystemSpec::Comparison {
                    terms: vec![ComparisonTerm { c: 1.0, mu: 0.5 }, ComparisonTerm { c: 1.0, mu: 2.0 }],
                },
                ControllerSpec::None,
            );
            s.integrator = cfg(1e-6, 3.5, 100);
            s.initial_conditions = vec![vec![1.0], vec![1e3], vec![1e6]];
            s.settling = SettlingSpec { eps: 1e-12, dwell: None };
            s.csv_stride = 1;
            s
        },
    },
];

/// Built-in scenario names with one-line descriptions, in a fixed order.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    BUILTINS.iter().map(|b| (b.name, b.description)).collect()
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    BUILTINS
        .iter()
        .find(|b| b.name == name)
        .map(|b| (b.make)())
        .ok_or_else(|| {
            let known: Vec<&str> = BUILTINS.iter().map(|b| b.name).collect();
            Error::Usage(format!("unknown scenario `{name}` (built-ins: {})", known.join(", ")))
        })
}

/// Resolves a command-line argument: an existing file is parsed as a scenario
/// document, anything else is looked up among the built-ins.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Scenario::from_json(&text).map_err(|e| match e {
            Error::Usage(m) => Error::Usage(format!("{}: {m}", path.display())),
            other => other,
        });
    }
    builtin_scenario(arg)
}

/// Output directory from the environment, or the default.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

// ---------------------------------------------------------------------------
// building and running

fn make_plant(name: &str, theta: &[f64]) -> Result<UncertainPlant> {
    match name {
        "example3-plant" => example3_plant(theta.to_vec()),
        "example4-plant" => example4_plant(theta.to_vec()),
        other => Err(Error::Usage(format!("system.name: unknown plant `{other}`"))),
    }
    .map_err(usage)
}

fn ilf_params(plant: &UncertainPlant, nu1: f64, nu2: f64, seed: u64, doc: &Option<ILFParamsDoc>) -> Result<ILFParams> {
    match doc {
        Some(d) => ILFParams::from_doc(d).map_err(usage),
        None => {
            let (r1, r2) = chain_weights(plant.state_dim(), nu1, nu2);
            let b = DMatrix::from_column_slice(plant.state_dim(), 1, plant.b().as_slice());
            synthesize_lmi(plant.a(), &b, nu1, nu2, &r1, &r2, seed)
        }
    }
}

fn ilf_controller(plant: &UncertainPlant, params: ILFParams) -> Result<Arc<IlfController>> {
    let b = DMatrix::from_column_slice(plant.state_dim(), 1, plant.b().as_slice());
    Ok(Arc::new(IlfController::new(plant.a().clone(), b, params, ILFSolveConfig::default())?))
}

/// How the adaptation state maps to the parameter estimate, for reporting.
#[derive(Clone)]
enum Estimate {
    None,
    Direct { theta: Vec<f64>, params: FTControllerParams },
    Arctan { theta: Vec<f64>, params: FxTAdaptiveParams, ctl: Arc<IlfController> },
}

/// A scenario resolved into a runnable system.
pub struct Prepared {
    pub system: SystemModel,
    pub plant_dim: usize,
    pub ilf: Option<ILFParams>,
    estimate: Estimate,
}

pub fn prepare(sc: &Scenario) -> Result<Prepared> {
    sc.validate()?;
    match (&sc.system, &sc.controller) {
        (SystemSpec::Builtin { name }, _) => {
            let system = builtin_system(name)?;
            Ok(Prepared { plant_dim: system.state_dim(), system, ilf: None, estimate: Estimate::None })
        }
        (SystemSpec::Comparison { terms }, _) => {
            let t: Vec<(f64, f64)> = terms.iter().map(|t| (t.c, t.mu)).collect();
            let system = comparison_system(&t).map_err(usage)?;
            Ok(Prepared { plant_dim: 1, system, ilf: None, estimate: Estimate::None })
        }
        (SystemSpec::Plant { name, theta }, ctl) => {
            let plant = make_plant(name, theta)?;
            let n = plant.state_dim();
            match ctl {
                ControllerSpec::None => unreachable!("rejected by validate"),
                ControllerSpec::Fts { alpha } => Ok(Prepared {
                    system: nominal_ft_loop(&plant, *alpha).map_err(usage)?,
                    plant_dim: n,
                    ilf: None,
                    estimate: Estimate::None,
                }),
                ControllerSpec::AdaptiveFt { alpha, l, s, gamma, validate } => {
                    let p = if *validate {
                        FTControllerParams::new(*alpha, *l, *s, *gamma)
                    } else {
                        FTControllerParams::without_lyapunov_check(*alpha, *l, *s, *gamma)
                    }
                    .map_err(usage)?;
                    Ok(Prepared {
                        system: adaptive_ft_loop(&plant, p).map_err(usage)?,
                        plant_dim: n,
                        ilf: None,
                        estimate: Estimate::Direct { theta: theta.clone(), params: p },
                    })
                }
                ControllerSpec::Ilf { nu1, nu2, seed, params } => {
                    let ip = ilf_params(&plant, *nu1, *nu2, *seed, params)?;
                    let c = ilf_controller(&plant, ip.clone())?;
                    Ok(Prepared { system: nominal_fxt_loop(&plant, c), plant_dim: n, ilf: Some(ip), estimate: Estimate::None })
                }
                ControllerSpec::AdaptiveIlf { nu1, nu2, theta_max, gamma, seed, params } => {
                    let ap = FxTAdaptiveParams::new(*theta_max, *gamma).map_err(usage)?;
                    let ip = ilf_params(&plant, *nu1, *nu2, *seed, params)?;
                    let c = ilf_controller(&plant, ip.clone())?;
                    let dynctl: Arc<dyn FixedTimeController> = c.clone();
                    Ok(Prepared {
                        system: adaptive_fxt_loop(&plant, dynctl, ap),
                        plant_dim: n,
                        ilf: Some(ip),
                        estimate: Estimate::Arctan { theta: theta.clone(), params: ap, ctl: c },
                    })
                }
            }
        }
    }
}

impl Prepared {
    /// Full initial state (plant state followed by the adaptation state).
    pub fn initial_state(&self, sc: &Scenario, x0: &[f64]) -> Result<Vec<f64>> {
        if x0.len() != self.plant_dim {
            return Err(Error::Usage(format!(
                "initial_conditions: entry of length {} for a {}-dimensional state",
                x0.len(),
                self.plant_dim
            )));
        }
        let extra = self.system.state_dim() - self.plant_dim;
        let mut s = x0.to_vec();
        match &sc.initial_adaptation {
            Some(w) if w.len() == extra => s.extend_from_slice(w),
            Some(w) => {
                return Err(Error::Usage(format!("initial_adaptation has length {}, expected {extra}", w.len())))
            }
            None => s.extend(std::iter::repeat(0.0).take(extra)),
        }
        Ok(s)
    }

    fn theta_hat(&self, w: &[f64]) -> Option<Vec<f64>> {
        match &self.estimate {
            Estimate::None => None,
            Estimate::Direct { .. } => Some(w.to_vec()),
            Estimate::Arctan { params, .. } => Some(theta_hat(w, params)),
        }
    }

    /// Composite Lyapunov candidate on the extended state, where defined.
    pub fn candidate(&self, s: &[f64]) -> Option<f64> {
        let (x, w) = s.split_at(self.plant_dim);
        match &self.estimate {
            Estimate::None => None,
            Estimate::Direct { theta, params } => Some(ft_candidate(x, w, theta, params)),
            Estimate::Arctan { theta, params, ctl } => {
                let v = ctl.lyapunov(x).ok()?;
                Some(fxt_candidate(v, w, theta, params))
            }
        }
    }

    /// `|θ| + √(2γV(x̃₀))`: bound on `|ω|` implied by a nonincreasing candidate
    /// (direct estimate only).
    pub fn omega_cap(&self, s0: &[f64]) -> Option<f64> {
        match &self.estimate {
            Estimate::Direct { theta, params } => {
                let v0 = self.candidate(s0)?;
                let tn = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                Some(tn + (2.0 * params.gamma * v0).sqrt())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub x0: Vec<f64>,
    pub diverged_at: Option<f64>,
    pub settled: bool,
    pub t_settle: Option<f64>,
    pub final_state: Vec<f64>,
    pub max_output_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_cap: Option<f64>,
    /// `max_t (V(t) − min_{s≤t} V(s))` for the composite candidate; zero when it
    /// never increases.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_max_rise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_hat_final: Option<Vec<f64>>,
    /// Rows `[t, θ̂₁, …, θ̂_q]`, at most about `HISTORY_ROWS` of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_hat_history: Option<Vec<Vec<f64>>>,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub description: String,
    pub integrator: IntegratorConfig,
    pub settling_eps: f64,
    pub settling_dwell: f64,
    pub runs: Vec<RunSummary>,
    /// Largest over smallest settling time when every run settled.
    pub settling_spread: Option<f64>,
    pub bounds: Vec<certify::NamedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ilf_params: Option<ILFParamsDoc>,
    pub diagnostics: Vec<String>,
}

impl ScenarioSummary {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().any(|r| r.diverged_at.is_some())
    }

    pub fn all_settled(&self) -> bool {
        self.runs.iter().all(|r| r.settled)
    }

    pub fn settling_times(&self) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| if r.settled { r.t_settle } else { None }).collect()
    }
}

/// Everything a run produces, before it is written anywhere.
pub struct ScenarioOutcome {
    pub summary: ScenarioSummary,
    pub trajectories: Vec<Trajectory>,
    pub certification: Option<CertificationReport>,
}

const HISTORY_ROWS: usize = 1000;

/// Largest rise of a sequence above its running minimum.
pub fn candidate_rise(values: &[f64]) -> f64 {
    let mut lowest = f64::INFINITY;
    let mut rise: f64 = 0.0;
    for &v in values {
        lowest = lowest.min(v);
        rise = rise.max(v - lowest);
    }
    rise
}

fn closed_form_bounds(sc: &Scenario) -> Vec<certify::NamedValue> {
    let SystemSpec::Comparison { terms } = &sc.system else { return Vec::new() };
    let nv = |name: String, value: f64| certify::NamedValue { name, value };
    let mut out = Vec::new();
    match terms.as_slice() {
        [t] if t.mu < 1.0 => {
            for (k, x0) in sc.initial_conditions.iter().enumerate() {
                if let Ok(b) = certify::finite_time_bound(x0[0].abs(), t.c, t.mu) {
                    out.push(nv(format!("finite_time_bound[{k}]"), b));
                }
            }
        }
        [t] if t.mu > 1.0 => {
            if let Ok(b) = certify::set_attraction_bound(t.c, t.mu, sc.settling.eps) {
                out.push(nv("set_attraction_bound".into(), b));
            }
        }
        [a, b] if a.mu < 1.0 && b.mu > 1.0 => {
            if let Ok(v) = certify::fixed_time_bound(a.c, a.mu, b.c, b.mu) {
                out.push(nv("fixed_time_bound".into(), v));
            }
        }
        _ => {}
    }
    out
}

/// Runs every initial condition (in parallel) and assembles the summary.
pub fn execute(sc: &Scenario) -> Result<ScenarioOutcome> {
    let prepared = prepare(sc)?;
    let starts: Vec<Vec<f64>> =
        sc.initial_conditions.iter().map(|x0| prepared.initial_state(sc, x0)).collect::<Result<_>>()?;
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|s0| integrate_recording(&prepared.system, s0, &sc.integrator))
        .collect::<Result<Vec<_>>>()?;
    let eps = sc.settling.eps;
    let dwell = sc.settling_dwell();
    let stride = sc.csv_stride.max(1);
    let n = prepared.plant_dim;

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut diagnostics = Vec::new();
    let mut trajectories = Vec::with_capacity(outcomes.len());
    for (k, (out, s0)) in outcomes.into_iter().zip(&starts).enumerate() {
        let traj = out.trajectory;
        let est = detect_settling(&traj, eps, dwell)?;
        let settled = est.settled && out.diverged_at.is_none();
        if let Some(t) = out.diverged_at {
            diagnostics.push(format!("run {k}: state became non-finite at t = {t}"));
        } else if !settled {
            diagnostics.push(format!("run {k}: output did not settle to {eps:e} within the horizon"));
        }
        let max_output_norm =
            traj.outputs().map(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let adaptive = traj.state_dim() > n;
        let (mut max_abs_omega, mut theta_hat_final, mut history, mut cand_inc) = (None, None, None, None);
        if adaptive {
            max_abs_omega = Some(
                traj.states().map(|s| s[n..].iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max),
            );
            theta_hat_final = prepared.theta_hat(&traj.final_state()[n..]);
            let last = traj.len() - 1;
            let every = stride.max(traj.len().div_ceil(HISTORY_ROWS));
            history = Some(
                (0..traj.len())
                    .filter(|i| i % every == 0 || *i == last)
                    .filter_map(|i| {
                        let mut row = vec![traj.times()[i]];
                        row.extend(prepared.theta_hat(&traj.state(i)[n..])?);
                        Some(row)
                    })
                    .collect(),
            );
            let values: Vec<f64> = traj.states().filter_map(|s| prepared.candidate(s)).collect();
            let inc = candidate_rise(&values);
            cand_inc = (!values.is_empty()).then_some(inc);
        }
        runs.push(RunSummary {
            index: k,
            x0: sc.initial_conditions[k].clone(),
            diverged_at: out.diverged_at,
            settled,
            t_settle: est.t_settle,
            final_state: traj.final_state().to_vec(),
            max_output_norm,
            max_abs_omega,
            omega_cap: prepared.omega_cap(s0),
            candidate_max_rise: cand_inc,
            theta_hat_final,
            theta_hat_history: history,
            csv: format!("run_{k}.csv"),
        });
        trajectories.push(traj);
    }
    let settling_spread = {
        let ts: Option<Vec<f64>> = runs.iter().map(|r| if r.settled { r.t_settle } else { None }).collect();
        ts.and_then(|ts| {
            let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ts.iter().cloned().fold(0.0, f64::max);
            (lo > 0.0).then(|| hi / lo)
        })
    };
    let certification = match (&sc.system, sc.certify) {
        (SystemSpec::Builtin { name }, true) => {
            let c = certify::builtin_certificate(name)?;
            Some(c.check(&certify::default_samples(2, certify::DEFAULT_SAMPLE_COUNT)?)?)
        }
        (_, true) => {
            diagnostics.push("certification is available for the built-in autonomous systems only".into());
            None
        }
        _ => None,
    };
    let mut bounds = closed_form_bounds(sc);
    if let Some(r) = &certification {
        bounds.extend(r.bounds.iter().cloned());
    }
    let summary = ScenarioSummary {
        schema_version: SCHEMA_VERSION,
        scenario: sc.name.clone(),
        description: sc.description.clone(),
        integrator: sc.integrator,
        settling_eps: eps,
        settling_dwell: dwell,
        runs,
        settling_spread,
        bounds,
        ilf_params: prepared.ilf.as_ref().map(|p| p.to_doc()),
        diagnostics,
    };
    Ok(ScenarioOutcome { summary, trajectories, certification })
}

impl ScenarioOutcome {
    /// Writes the artifacts into `dir` (created if needed).
    pub fn write(&self, dir: &Path, stride: usize) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (run, traj) in self.summary.runs.iter().zip(&self.trajectories) {
            traj.save_csv(&dir.join(&run.csv), stride)?;
        }
        let summary = serde_json::to_string_pretty(&self.summary).expect("plain data serializes");
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        if let Some(c) = &self.certification {
            let text = serde_json::to_string_pretty(c).expect("plain data serializes");
            std::fs::write(dir.join("certification.json"), text + "\n")?;
        }
        Ok(())
    }
}

/// Executes a scenario and writes its artifacts under `out_root/<name>/`.
/// Returns the summary and the directory written.
pub fn run(sc: &Scenario, out_root: &Path) -> Result<(ScenarioSummary, PathBuf)> {
    let outcome = execute(sc)?;
    let dir = out_root.join(&sc.name);
    outcome.write(&dir, sc.csv_stride)?;
    Ok((outcome.summary, dir))
}

/// Certifies a built-in autonomous system and writes `certification.json`
/// under `out_root/<name>/`.
pub fn certify_builtin(name: &str, out_root: &Path) -> Result<(CertificationReport, PathBuf)> {
    let c = certify::builtin_certificate(name)?;
    let report = c.check(&certify::default_samples(2, certify::DEFAULT_SAMPLE_COUNT)?)?;
    let dir = out_root.join(name);
    std::fs::create_dir_all(&dir)?;
    let text = serde_json::to_string_pretty(&report).expect("plain data serializes");
    std::fs::write(dir.join("certification.json"), text + "\n")?;
    Ok((report, dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_listed_in_order_and_valid() {
        let names: Vec<&str> = list_scenarios().iter().map(|(n, _)| *n).collect();
        assert_eq!(&names[..4], &["example1", "example2", "example3", "example3-noadapt"]);
        assert!(names.contains(&"example4") && names.contains(&"comparison-fixed-time"));
        for n in names {
            let sc = builtin_scenario(n).unwrap();
            assert_eq!(sc.name, n);
            sc.validate().unwrap();
            let back = Scenario::from_json(&sc.to_json()).unwrap();
            assert_eq!(back, sc);
        }
    }

    #[test]
    fn unknown_names_and_keys_are_usage_errors() {
        assert!(matches!(builtin_scenario("nope"), Err(Error::Usage(_))));
        let mut doc: serde_json::Value = serde_json::from_str(&builtin_scenario("example1").unwrap().to_json()).unwrap();
        doc["bogus"] = serde_json::json!(1);
        match Scenario::from_json(&doc.to_string()) {
            Err(Error::Usage(m)) => assert!(m.contains("bogus"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn controller_system_pairing_is_checked() {
        let mut sc = builtin_scenario("example1").unwrap();
        sc.controller = ControllerSpec::Fts { alpha: 0.5 };
        assert!(matches!(sc.validate(), Err(Error::Usage(_))));
        let mut sc = builtin_scenario("example3").unwrap();
        sc.initial_conditions = vec![vec![1.0]];
        assert!(matches!(execute(&sc), Err(Error::Usage(_))));
    }

    #[test]
    fn overrides_apply() {
        let sc = builtin_scenario("example4").unwrap().with_overrides(Some(1e-3), Some(2.0), Some(99)).unwrap();
        assert_eq!(sc.integrator.dt, 1e-3);
        assert_eq!(sc.integrator.horizon, 2.0);
        assert!(matches!(sc.controller, ControllerSpec::AdaptiveIlf { seed: 99, .. }));
        assert!(builtin_scenario("example1").unwrap().with_overrides(Some(-1.0), None, None).is_err());
    }

    #[test]
    fn comparison_scenario_settles_at_two() {
        let sc = builtin_scenario("comparison-finite-time").unwrap();
        let out = execute(&sc).unwrap();
        let r = &out.summary.runs[0];
        assert!(r.settled);
        assert!((r.t_settle.unwrap() - 2.0).abs() < 2e-3);
        assert_eq!(out.summary.bounds[0].value, 2.0);
    }
}
