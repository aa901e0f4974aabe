//! System models: the generic `ẋ = f(x), y = h(x)` container, the built-in
//! example systems, the uncertain linear-in-parameters plant and the adaptive
//! closed loop on the extended state `x̃ = [x; ω]`.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::homogeneity::{sign, spow};
use crate::linalg;

pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Feedback `u(x, ω)`.
pub type AdaptiveControl = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Parameter update `ω̇(x, ω)`.
pub type AdaptationLaw = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A finite-dimensional system `ẋ = f(x)`, `y = h(x)`.
///
/// `clamp_components` names the state components that the integrator treats as
/// the regulated state: once they are within the origin-stop radius they are
/// pinned to zero. For adaptive loops this is the plant part of `[x; ω]`.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    state_dim: usize,
    output_dim: usize,
    rhs: VectorMap,
    output: VectorMap,
    control: Option<ScalarMap>,
    clamp_components: Range<usize>,
}

impl std::fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("output_dim", &self.output_dim)
            .field("has_control", &self.control.is_some())
            .finish()
    }
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        output_dim: usize,
        rhs: VectorMap,
        output: VectorMap,
    ) -> Result<Self> {
        if state_dim == 0 || output_dim == 0 {
            return Err(Error::invalid("state and output dimensions must be positive"));
        }
        Ok(Self {
            name: name.into(),
            state_dim,
            output_dim,
            rhs,
            output,
            control: None,
            clamp_components: 0..state_dim,
        })
    }

    /// Attaches a probe that reports the applied control at a state; used only
    /// for recording.
    pub fn with_control_probe(mut self, control: ScalarMap) -> Self {
        self.control = Some(control);
        self
    }

    pub fn with_clamp_components(mut self, range: Range<usize>) -> Result<Self> {
        if range.end > self.state_dim || range.is_empty() {
            return Err(Error::invalid("clamp range must be a nonempty subrange of the state"));
        }
        self.clamp_components = range;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn clamp_components(&self) -> Range<usize> {
        self.clamp_components.clone()
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        (self.rhs)(x)
    }

    pub fn output(&self, x: &[f64]) -> Vec<f64> {
        (self.output)(x)
    }

    pub fn control(&self, x: &[f64]) -> Option<f64> {
        self.control.as_ref().map(|c| c(x))
    }

    pub fn has_control(&self) -> bool {
        self.control.is_some()
    }

    /// Verifies `f(0) = 0` and `h(0) = 0`.
    pub fn check_equilibrium(&self) -> Result<()> {
        let zero = vec![0.0; self.state_dim];
        let f0 = self.rhs(&zero);
        let h0 = self.output(&zero);
        if f0.len() != self.state_dim || h0.len() != self.output_dim {
            return Err(Error::invalid(format!("{}: rhs/output dimension mismatch", self.name)));
        }
        if f0.iter().chain(&h0).any(|v| *v != 0.0) {
            return Err(Error::invalid(format!("{}: origin is not an equilibrium", self.name)));
        }
        Ok(())
    }
}

/// `ẋ₁ = −⌈x₁⌋^{1/2} + x₂²x₁`, `ẋ₂ = −|x₁|^{3/2}x₂`, `y = x₁`.
pub fn example1_system() -> SystemModel {
    let rhs: VectorMap = Arc::new(|x: &[f64]| {
        let (x1, x2) = (x[0], x[1]);
        vec![-spow(x1, 0.5) + x2 * x2 * x1, -x1.abs().powf(1.5) * x2]
    });
    let sys = SystemModel::new("example1", 2, 1, rhs, Arc::new(|x: &[f64]| vec![x[0]]))
        .expect("static dimensions");
    sys.check_equilibrium().expect("built-in system has the origin as equilibrium");
    sys
}

/// `ẋ₁ = −⌈x₁⌋^{1/2} + 2x₁ sin x₂ − sign(x₁)x₁²`,
/// `ẋ₂ = |x₁|^{3/2} + sin x₂ sin² x₁`, `y = x₁`.
pub fn example2_system() -> SystemModel {
    let rhs: VectorMap = Arc::new(|x: &[f64]| {
        let (x1, x2) = (x[0], x[1]);
        let s1 = x1.sin();
        vec![
            -spow(x1, 0.5) + 2.0 * x1 * x2.sin() - sign(x1) * x1 * x1,
            x1.abs().powf(1.5) + x2.sin() * s1 * s1,
        ]
    });
    let sys = SystemModel::new("example2", 2, 1, rhs, Arc::new(|x: &[f64]| vec![x[0]]))
        .expect("static dimensions");
    sys.check_equilibrium().expect("built-in system has the origin as equilibrium");
    sys
}

/// Scalar comparison system `V̇ = −Σ cᵢ⌈V⌋^{μᵢ}` with output `V`.
pub fn comparison_system(terms: &[(f64, f64)]) -> Result<SystemModel> {
    if terms.is_empty() {
        return Err(Error::invalid("comparison system needs at least one term"));
    }
    if let Some((c, mu)) = terms.iter().find(|(c, mu)| !(*c > 0.0 && *mu > 0.0)) {
        return Err(Error::invalid(format!("comparison term needs c > 0 and mu > 0, got ({c}, {mu})")));
    }
    let terms = terms.to_vec();
    let rhs: VectorMap = Arc::new(move |v: &[f64]| vec![-terms.iter().map(|(c, mu)| c * spow(v[0], *mu)).sum::<f64>()]);
    SystemModel::new("comparison", 1, 1, rhs, Arc::new(|v: &[f64]| vec![v[0]]))
}

/// Plant `ẋ = Ax + B(φ(x)ᵀθ + u)` with a known regressor `φ` and unknown `θ`.
///
/// The true parameter vector is held here for simulation only; controllers and
/// adaptation laws built by this crate never receive it.
#[derive(Clone)]
pub struct UncertainPlant {
    name: String,
    a: DMatrix<f64>,
    b: DVector<f64>,
    phi: VectorMap,
    theta: Vec<f64>,
}

impl std::fmt::Debug for UncertainPlant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UncertainPlant")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("q", &self.theta.len())
            .finish()
    }
}

impl UncertainPlant {
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        phi: VectorMap,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || n == 0 {
            return Err(Error::invalid("A must be n×n and B must be n×1"));
        }
        if theta.is_empty() {
            return Err(Error::invalid("parameter vector must be nonempty"));
        }
        let probe = phi(&vec![0.0; n]);
        if probe.len() != theta.len() {
            return Err(Error::invalid(format!(
                "regressor has {} entries but θ has {}",
                probe.len(),
                theta.len()
            )));
        }
        let bm = DMatrix::from_column_slice(n, 1, b.as_slice());
        if !linalg::is_controllable(&a, &bm) {
            return Err(Error::invalid("(A, B) is not controllable"));
        }
        Ok(Self { name: name.into(), a, b, phi, theta })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn param_dim(&self) -> usize {
        self.theta.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn regressor(&self, x: &[f64]) -> Vec<f64> {
        (self.phi)(x)
    }

    pub fn regressor_map(&self) -> VectorMap {
        self.phi.clone()
    }

    /// Ground-truth parameters. Intended for simulation diagnostics and tests.
    pub fn true_parameters(&self) -> &[f64] {
        &self.theta
    }

    /// Same plant structure with a different true parameter vector.
    pub fn with_parameters(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.name.clone(), self.a.clone(), self.b.clone(), self.phi.clone(), theta)
    }

    /// `A·x + B·(φ(x)ᵀθ + u)`.
    pub fn rhs(&self, x: &[f64], u: f64) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::invalid(format!(
                "state has dimension {} but plant has {}",
                x.len(),
                self.state_dim()
            )));
        }
        Ok(self.rhs_unchecked(x, u))
    }

    pub(crate) fn rhs_unchecked(&self, x: &[f64], u: f64) -> Vec<f64> {
        let n = self.state_dim();
        let phi = (self.phi)(x);
        let drift: f64 = phi.iter().zip(&self.theta).map(|(p, t)| p * t).sum::<f64>() + u;
        (0..n)
            .map(|i| (0..n).map(|j| self.a[(i, j)] * x[j]).sum::<f64>() + self.b[i] * drift)
            .collect()
    }

    /// Closed loop `ẋ = Ax + B(φᵀθ + u(x))` under a static feedback.
    pub fn closed_loop(&self, name: impl Into<String>, control: ScalarMap) -> SystemModel {
        let plant = self.clone();
        let c = control.clone();
        let n = self.state_dim();
        let rhs: VectorMap = Arc::new(move |x: &[f64]| plant.rhs_unchecked(x, c(x)));
        SystemModel::new(name, n, n, rhs, Arc::new(|x: &[f64]| x.to_vec()))
            .expect("plant dimensions are positive")
            .with_control_probe(control)
    }
}

/// Free-function form of [`UncertainPlant::rhs`].
pub fn plant_rhs(p: &UncertainPlant, x: &[f64], u: f64) -> Result<Vec<f64>> {
    p.rhs(x, u)
}

fn double_integrator() -> (DMatrix<f64>, DVector<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0]),
    )
}

/// Double integrator with `φ(x) = (sin(x₁x₂), x₂²)`.
pub fn example3_plant(theta: Vec<f64>) -> Result<UncertainPlant> {
    let (a, b) = double_integrator();
    let phi: VectorMap = Arc::new(|x: &[f64]| vec![(x[0] * x[1]).sin(), x[1] * x[1]]);
    UncertainPlant::new("example3-plant", a, b, phi, theta)
}

/// Double integrator with `φ(x) = (sin(x₁x₂), x₂)`.
pub fn example4_plant(theta: Vec<f64>) -> Result<UncertainPlant> {
    let (a, b) = double_integrator();
    let phi: VectorMap = Arc::new(|x: &[f64]| vec![(x[0] * x[1]).sin(), x[1]]);
    UncertainPlant::new("example4-plant", a, b, phi, theta)
}

/// Looks up a built-in autonomous system by name.
pub fn builtin_system(name: &str) -> Result<SystemModel> {
    match name {
        "example1" => Ok(example1_system()),
        "example2" => Ok(example2_system()),
        other => Err(Error::Usage(format!("unknown system `{other}`"))),
    }
}

/// Looks up a built-in plant by name, with its reference parameter vector.
pub fn builtin_plant(name: &str) -> Result<UncertainPlant> {
    match name {
        "example3-plant" => example3_plant(vec![3.0, -2.0]),
        "example4-plant" => example4_plant(vec![3.0, 2.0]),
        other => Err(Error::Usage(format!("unknown plant `{other}`"))),
    }
}

/// Plant state and adaptive parameter estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub x: Vec<f64>,
    pub omega: Vec<f64>,
}

impl ExtendedState {
    pub fn new(plant: &UncertainPlant, x: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if x.len() != plant.state_dim() || omega.len() != plant.param_dim() {
            return Err(Error::invalid("extended state dimensions do not match the plant"));
        }
        Ok(Self { x, omega })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.omega);
        v
    }

    pub fn split(v: &[f64], n: usize) -> (&[f64], &[f64]) {
        v.split_at(n)
    }
}

/// Builds the extended-state closed loop
/// `ẋ = Ax + B(φ(x)ᵀθ + u(x, ω))`, `ω̇ = κ(x, ω)`, output `x`.
pub fn assemble_adaptive_loop(
    p: &UncertainPlant,
    control: AdaptiveControl,
    adaptation: AdaptationLaw,
) -> SystemModel {
    let n = p.state_dim();
    let q = p.param_dim();
    let plant = p.clone();
    let ctl = control.clone();
    let rhs: VectorMap = Arc::new(move |s: &[f64]| {
        let (x, w) = s.split_at(n);
        let mut out = plant.rhs_unchecked(x, ctl(x, w));
        out.extend(adaptation(x, w));
        out
    });
    let output: VectorMap = Arc::new(move |s: &[f64]| s[..n].to_vec());
    let probe: ScalarMap = Arc::new(move |s: &[f64]| {
        let (x, w) = s.split_at(n);
        control(x, w)
    });
    SystemModel::new(format!("{}-adaptive", p.name()), n + q, n, rhs, output)
        .expect("positive dimensions")
        .with_control_probe(probe)
        .with_clamp_components(0..n)
        .expect("plant block is a subrange of the extended state")
}
