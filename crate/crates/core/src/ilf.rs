//! Implicit Lyapunov function (ILF) fixed-time controller.
//!
//! `V(x) > 0` is defined implicitly by `Q(V, x) = xᵀD_r(V⁻¹)X⁻¹D_r(V⁻¹)x − 1 = 0`,
//! using the weights `r₁` inside the ellipsoid `xᵀX⁻¹x < 1` (negative
//! homogeneity degree `ν₁`) and `r₂` outside it (positive degree `ν₂`). Both
//! branches meet on the ellipsoid, where `V = 1` and `D(1) = I`.
//!
//! The feedback is `u = V^{1+ν₁}·k·D_{r₁}(V⁻¹)x` inside and
//! `u = V^{1+2ν₂}·k·D_{r₂}(V⁻¹)x` outside, with `k = YX⁻¹` obtained from the
//! matrix inequalities checked by [`verify_lmi`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::FixedTimeController;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, eig_sym, is_controllable, is_symmetric};

/// Which homogeneous branch of the implicit function applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `xᵀX⁻¹x < 1`, weights `r₁`.
    Inner,
    /// `xᵀX⁻¹x ≥ 1`, weights `r₂`.
    Outer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ILFParams {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    k: DMatrix<f64>,
    x_inv: DMatrix<f64>,
    nu1: f64,
    nu2: f64,
    r1: Vec<f64>,
    r2: Vec<f64>,
    zeta: [f64; 3],
}

/// Weights of a chain of `n` integrators for the two homogeneity degrees:
/// `r₁ᵢ = 1 − (n − i)ν₁`, `r₂ᵢ = 1 + (i − 1)ν₂` (`i = 1..n`). For `n = 2` this is
/// `r₁ = (1 − ν₁, 1)`, `r₂ = (1, 1 + ν₂)`.
pub fn chain_weights(n: usize, nu1: f64, nu2: f64) -> (Vec<f64>, Vec<f64>) {
    let r1 = (0..n).map(|i| 1.0 - (n - 1 - i) as f64 * nu1).collect();
    let r2 = (0..n).map(|i| 1.0 + i as f64 * nu2).collect();
    (r1, r2)
}

impl ILFParams {
    /// Structural validation: `X` symmetric positive definite, `k = YX⁻¹`,
    /// `ν₁ ∈ (−1, 0)`, `ν₂ > 0`, positive weights and rates. The matrix
    /// inequalities themselves need the plant and are checked by [`verify_lmi`].
    pub fn new(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        nu1: f64,
        nu2: f64,
        r1: Vec<f64>,
        r2: Vec<f64>,
        zeta: [f64; 3],
    ) -> Result<Self> {
        let n = x.nrows();
        if x.ncols() != n || n == 0 {
            return Err(Error::invalid("X must be square"));
        }
        if y.nrows() != 1 || y.ncols() != n {
            return Err(Error::invalid("Y must be 1×n"));
        }
        if r1.len() != n || r2.len() != n {
            return Err(Error::invalid("weight vectors must have length n"));
        }
        if r1.iter().chain(&r2).any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("weights must be positive"));
        }
        if !(nu1 > -1.0 && nu1 < 0.0) {
            return Err(Error::invalid(format!("nu1 must lie in (-1, 0), got {nu1}")));
        }
        if !(nu2 > 0.0 && nu2.is_finite()) {
            return Err(Error::invalid(format!("nu2 must be positive, got {nu2}")));
        }
        if zeta.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
            return Err(Error::invalid("zeta rates must be positive"));
        }
        if !is_symmetric(&x, 1e-12) {
            return Err(Error::invalid("X must be symmetric"));
        }
        let ev = eig_sym(&x)?;
        if !(ev[0] > 0.0) {
            return Err(Error::invalid(format!("X must be positive definite, min eigenvalue {}", ev[0])));
        }
        let x_inv = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("X is singular"))?;
        let k = &y * &x_inv;
        let resid = (&k * &x - &y).amax();
        if resid > 1e-10 * y.amax().max(1.0) {
            return Err(Error::invalid(format!("k·X differs from Y by {resid:e}")));
        }
        Ok(Self { x, y, k, x_inv, nu1, nu2, r1, r2, zeta })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn x_inv(&self) -> &DMatrix<f64> {
        &self.x_inv
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn nu2(&self) -> f64 {
        self.nu2
    }

    pub fn r1(&self) -> &[f64] {
        &self.r1
    }

    pub fn r2(&self) -> &[f64] {
        &self.r2
    }

    pub fn zeta(&self) -> [f64; 3] {
        self.zeta
    }

    pub fn weights(&self, region: Region) -> &[f64] {
        match region {
            Region::Inner => &self.r1,
            Region::Outer => &self.r2,
        }
    }

    /// `xᵀX⁻¹x`.
    pub fn ellipsoid_form(&self, x: &[f64]) -> f64 {
        quad_form(&self.x_inv, x, x)
    }

    pub fn region_of(&self, x: &[f64]) -> Region {
        if self.ellipsoid_form(x) < 1.0 {
            Region::Inner
        } else {
            Region::Outer
        }
    }

    pub fn to_doc(&self) -> ILFParamsDoc {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
        };
        ILFParamsDoc {
            x: rows(&self.x),
            y: rows(&self.y),
            nu1: self.nu1,
            nu2: self.nu2,
            r1: self.r1.clone(),
            r2: self.r2.clone(),
            zeta1: self.zeta[0],
            zeta2: self.zeta[1],
            zeta3: self.zeta[2],
        }
    }

    pub fn from_doc(doc: &ILFParamsDoc) -> Result<Self> {
        let mat = |rows: &[Vec<f64>], what: &str| -> Result<DMatrix<f64>> {
            let nr = rows.len();
            let nc = rows.first().map(|r| r.len()).unwrap_or(0);
            if nr == 0 || rows.iter().any(|r| r.len() != nc) {
                return Err(Error::invalid(format!("{what} must be a nonempty rectangular row array")));
            }
            Ok(DMatrix::from_row_iterator(nr, nc, rows.iter().flatten().cloned()))
        };
        Self::new(
            mat(&doc.x, "X")?,
            mat(&doc.y, "Y")?,
            doc.nu1,
            doc.nu2,
            doc.r1.clone(),
            doc.r2.clone(),
            [doc.zeta1, doc.zeta2, doc.zeta3],
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ILFParamsDoc =
            serde_json::from_str(text).map_err(|e| Error::Usage(format!("ILF parameter document: {e}")))?;
        Self::from_doc(&doc)
    }
}

/// Text form of [`ILFParams`]; matrices are arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ILFParamsDoc {
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
    pub nu1: f64,
    pub nu2: f64,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub zeta1: f64,
    pub zeta2: f64,
    pub zeta3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ILFSolveConfig {
    /// Accept `V` once `|Q(V, x)| ≤ tol`.
    pub tol: f64,
    pub v_min: f64,
    pub max_iter: usize,
    pub bracket_growth: f64,
}

impl Default for ILFSolveConfig {
    fn default() -> Self {
        Self { tol: 1e-10, v_min: 1e-12, max_iter: 200, bracket_growth: 4.0 }
    }
}

impl ILFSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.v_min > 0.0 && self.bracket_growth > 1.0 && self.max_iter > 0) {
            return Err(Error::invalid("ILF solve config needs tol > 0, v_min > 0, growth > 1, max_iter > 0"));
        }
        Ok(())
    }
}

fn quad_form(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * b[j];
        }
        s += a[i] * row;
    }
    s
}

fn scaled(v: f64, r: &[f64], x: &[f64]) -> Vec<f64> {
    x.iter().zip(r).map(|(xi, ri)| v.powf(-ri) * xi).collect()
}

#[inline]
fn q_raw(v: f64, x: &[f64], x_inv: &DMatrix<f64>, r: &[f64]) -> f64 {
    let z = scaled(v, r, x);
    quad_form(x_inv, &z, &z) - 1.0
}

/// `Q(V, x) = xᵀD_r(V⁻¹)X⁻¹D_r(V⁻¹)x − 1`.
pub fn q_function(v: f64, x: &[f64], x_inv: &DMatrix<f64>, r: &[f64]) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::invalid(format!("V must be positive, got {v}")));
    }
    if x.len() != r.len() || x_inv.nrows() != x.len() || x_inv.ncols() != x.len() {
        return Err(Error::invalid("dimension mismatch in Q"));
    }
    Ok(q_raw(v, x, x_inv, r))
}

/// Solves `Q(V, x) = 0` by geometric bisection and reports the branch used.
pub fn locate(x: &[f64], params: &ILFParams, cfg: &ILFSolveConfig) -> Result<(f64, Region)> {
    if x.len() != params.dim() {
        return Err(Error::invalid("state dimension does not match ILF parameters"));
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("V is not defined implicitly at the origin (V(0) = 0)".into()));
    }
    let form = params.ellipsoid_form(x);
    let region = if form < 1.0 { Region::Inner } else { Region::Outer };
    let r = params.weights(region);
    let q = |v: f64| q_raw(v, x, &params.x_inv, r);

    let at_one = form - 1.0;
    if at_one.abs() <= cfg.tol {
        return Ok((1.0, region));
    }
    let mut iters = 0usize;
    let (mut lo, mut hi) = match region {
        Region::Inner => {
            let lo = cfg.v_min;
            if q(lo) <= 0.0 {
                return Err(Error::NumericalFailure {
                    message: format!("state too close to the origin: Q(v_min) ≤ 0 for |x| = {:e}", norm(x)),
                    bracket: (lo, 1.0),
                });
            }
            (lo, 1.0)
        }
        Region::Outer => {
            let (mut lo, mut hi) = (1.0, cfg.bracket_growth);
            while q(hi) > 0.0 {
                lo = hi;
                hi *= cfg.bracket_growth;
                iters += 1;
                if iters >= cfg.max_iter || !hi.is_finite() {
                    return Err(Error::NumericalFailure {
                        message: "could not bracket V from above".into(),
                        bracket: (lo, hi),
                    });
                }
            }
            (lo, hi)
        }
    };
    while iters < cfg.max_iter {
        iters += 1;
        let mid = (lo * hi).sqrt();
        let qm = q(mid);
        if qm.abs() <= cfg.tol {
            return Ok((mid, region));
        }
        if qm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi <= lo * (1.0 + 4.0 * f64::EPSILON) {
            break;
        }
    }
    Err(Error::NumericalFailure {
        message: format!("bisection stopped after {iters} iterations without |Q| ≤ {:e}", cfg.tol),
        bracket: (lo, hi),
    })
}

/// `V(x)` for `x ≠ 0`.
pub fn solve_ilf(x: &[f64], params: &ILFParams, cfg: &ILFSolveConfig) -> Result<f64> {
    locate(x, params, cfg).map(|(v, _)| v)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `∂V/∂x = −(∂Q/∂V)⁻¹ ∂Q/∂x` on the given branch, where with `z = D_r(V⁻¹)x`,
/// `∂Q/∂x = 2zᵀX⁻¹D_r(V⁻¹)` and `∂Q/∂V = −V⁻¹zᵀ(HX⁻¹ + X⁻¹H)z`, `H = diag(r)`.
pub fn ilf_gradient_in(x: &[f64], v: f64, params: &ILFParams, region: Region) -> Result<Vec<f64>> {
    let r = params.weights(region);
    let n = x.len();
    let d: Vec<f64> = r.iter().map(|ri| v.powf(-ri)).collect();
    let z: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a * b).collect();
    let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| params.x_inv[(i, j)] * z[j]).sum()).collect();
    let dq_dv = -(2.0 / v) * (0..n).map(|i| r[i] * z[i] * w[i]).sum::<f64>();
    if dq_dv.abs() < 1e-14 {
        return Err(Error::NumericalFailure {
            message: "degenerate level set: ∂Q/∂V vanishes".into(),
            bracket: (v, v),
        });
    }
    Ok((0..n).map(|i| -(2.0 * w[i] * d[i]) / dq_dv).collect())
}

/// Gradient on the branch selected by the region test.
pub fn ilf_gradient(x: &[f64], v: f64, params: &ILFParams) -> Result<Vec<f64>> {
    ilf_gradient_in(x, v, params, params.region_of(x))
}

/// Gradient on the switching surface, taken from the branch the state enters
/// when moving with velocity `xdot`; ties go to the inner branch.
pub fn ilf_gradient_on_surface(x: &[f64], xdot: &[f64], params: &ILFParams) -> Result<Vec<f64>> {
    let outward = quad_form(&params.x_inv, x, xdot);
    let region = if outward > 0.0 { Region::Outer } else { Region::Inner };
    ilf_gradient_in(x, 1.0, params, region)
}

fn branch_control(x: &[f64], v: f64, region: Region, params: &ILFParams) -> f64 {
    let (r, power) = match region {
        Region::Inner => (&params.r1, 1.0 + params.nu1),
        Region::Outer => (&params.r2, 1.0 + 2.0 * params.nu2),
    };
    let z = scaled(v, r, x);
    let kz: f64 = (0..z.len()).map(|j| params.k[(0, j)] * z[j]).sum();
    v.powf(power) * kz
}

/// Fixed-time feedback; `u(0) = 0`.
pub fn u_fxts(x: &[f64], params: &ILFParams, cfg: &ILFSolveConfig) -> Result<f64> {
    if x.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let (v, region) = locate(x, params, cfg)?;
    Ok(branch_control(x, v, region, params))
}

/// Evaluates one branch of the feedback regardless of the region test.
pub fn u_fxts_branch(x: &[f64], params: &ILFParams, cfg: &ILFSolveConfig, region: Region) -> Result<f64> {
    if x.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let r = params.weights(region);
    let v = bisect_branch(x, params, r, cfg)?;
    Ok(branch_control(x, v, region, params))
}

fn bisect_branch(x: &[f64], params: &ILFParams, r: &[f64], cfg: &ILFSolveConfig) -> Result<f64> {
    let q = |v: f64| q_raw(v, x, &params.x_inv, r);
    let (mut lo, mut hi) = (cfg.v_min, 1.0);
    while q(hi) > 0.0 {
        lo = hi;
        hi *= cfg.bracket_growth;
        if !hi.is_finite() {
            return Err(Error::NumericalFailure { message: "no upper bracket".into(), bracket: (lo, hi) });
        }
    }
    for _ in 0..cfg.max_iter {
        let mid = (lo * hi).sqrt();
        let qm = q(mid);
        if qm.abs() <= cfg.tol {
            return Ok(mid);
        }
        if qm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NumericalFailure { message: "branch bisection did not converge".into(), bracket: (lo, hi) })
}

/// Signed eigenvalue margins of the three matrix inequalities.
///
/// - `decay = −λ_max(AX + XAᵀ + BY + YᵀBᵀ + ζ₁X)`, must be `> 0`;
/// - `*_upper = λ_min(ζX − (XH + HX))`, must be `≥ 0`;
/// - `*_lower = λ_min(XH + HX)`, must be `> 0`;
/// - `x_min = λ_min(X)`, must be `> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmiMargins {
    pub decay: f64,
    pub inner_upper: f64,
    pub inner_lower: f64,
    pub outer_upper: f64,
    pub outer_lower: f64,
    pub x_min: f64,
}

/// Roundoff allowance for the non-strict inequalities.
const NONSTRICT_SLACK: f64 = 1e-12;

impl LmiMargins {
    pub fn passed(&self) -> bool {
        self.decay > 0.0
            && self.inner_upper >= -NONSTRICT_SLACK
            && self.inner_lower > 0.0
            && self.outer_upper >= -NONSTRICT_SLACK
            && self.outer_lower > 0.0
            && self.x_min > 0.0
    }

    /// One number per inequality: the decay margin and the two-sided margins
    /// `min(upper, lower)` of the weight inequalities.
    pub fn triple(&self) -> [f64; 3] {
        [
            self.decay,
            self.inner_upper.min(self.inner_lower),
            self.outer_upper.min(self.outer_lower),
        ]
    }
}

fn sym_weight_product(x: &DMatrix<f64>, r: &[f64]) -> DMatrix<f64> {
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(r));
    x * &h + &h * x
}

fn lyapunov_lhs(a: &DMatrix<f64>, b: &DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let by = b * y;
    a * x + x * a.transpose() + &by + by.transpose()
}

pub fn verify_lmi(a: &DMatrix<f64>, b: &DMatrix<f64>, params: &ILFParams) -> Result<LmiMargins> {
    let n = params.dim();
    if a.nrows() != n || a.ncols() != n || b.nrows() != n || b.ncols() != 1 {
        return Err(Error::invalid("A must be n×n and B n×1"));
    }
    let x = &params.x;
    let [z1, z2, z3] = params.zeta;
    let m = lyapunov_lhs(a, b, x, &params.y) + x * z1;
    let decay = -*eig_sym(&m)?.last().expect("n ≥ 1");
    let w1 = sym_weight_product(x, &params.r1);
    let w2 = sym_weight_product(x, &params.r2);
    let min_ev = |m: &DMatrix<f64>| -> Result<f64> { Ok(eig_sym(m)?[0]) };
    Ok(LmiMargins {
        decay,
        inner_upper: min_ev(&(x * z2 - &w1))?,
        inner_lower: min_ev(&w1)?,
        outer_upper: min_ev(&(x * z3 - &w2))?,
        outer_lower: min_ev(&w2)?,
        x_min: min_ev(x)?,
    })
}

/// Largest `ζ` with `M + ζX ≺ 0`, i.e. `−λ_max(L⁻¹ M L⁻ᵀ)` for `X = LLᵀ`, and the
/// smallest `ζ` with `ζX ⪰ W`.
fn relative_extremes(x: &DMatrix<f64>, m: &DMatrix<f64>, largest: bool) -> Option<f64> {
    let l = cholesky(x)?;
    let li = l.try_inverse()?;
    let s = &li * m * li.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let ev = eig_sym(&s).ok()?;
    Some(if largest { *ev.last()? } else { ev[0] })
}

struct SynthesisProblem<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DMatrix<f64>,
    r1: &'a [f64],
    r2: &'a [f64],
    n: usize,
}

impl SynthesisProblem<'_> {
    fn unpack(&self, p: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut x = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                x[(i, j)] = p[idx];
                x[(j, i)] = p[idx];
                idx += 1;
            }
        }
        let y = DMatrix::from_row_slice(1, n, &p[idx..idx + n]);
        (x, y)
    }

    /// `X` rescaled to `λ_max(X) = 1` with `Y` left alone, so the box on `Y`
    /// bounds the gain `YX⁻¹`.
    fn unpack_normalized(&self, p: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let (x, y) = self.unpack(p);
        let ev = eig_sym(&x).ok()?;
        if !(ev[0] > 0.0) {
            return None;
        }
        Some((x / ev[self.n - 1], y))
    }

    /// Decay rate `ζ*` of the normalized point, provided `X` is well conditioned
    /// and both weighted products keep a positivity margin; otherwise the
    /// (negative) shortfall, pulling the search back into the admissible set.
    fn objective(&self, p: &[f64]) -> f64 {
        let Some((x, y)) = self.unpack_normalized(p) else { return f64::NEG_INFINITY };
        let Ok(ev) = eig_sym(&x) else { return f64::NEG_INFINITY };
        let m = lyapunov_lhs(self.a, self.b, &x, &y);
        let Some(top) = relative_extremes(&x, &m, true) else { return f64::NEG_INFINITY };
        let lw1 = eig_sym(&sym_weight_product(&x, self.r1)).map(|e| e[0]).unwrap_or(f64::NEG_INFINITY);
        let lw2 = eig_sym(&sym_weight_product(&x, self.r2)).map(|e| e[0]).unwrap_or(f64::NEG_INFINITY);
        let shortfall = (lw1.min(lw2) - SYNTH_W_MARGIN).min(ev[0] - SYNTH_X_COND);
        if shortfall < 0.0 {
            return shortfall - 1e6;
        }
        -top
    }
}

const SYNTH_ITERS: usize = 4000;
const SYNTH_RESTARTS: usize = 8;
/// Required `λ_min(XH + HX) / λ_max(X)` for both weight matrices `H`.
const SYNTH_W_MARGIN: f64 = 0.05;
/// Bound on the condition number of `X` (as `λ_min / λ_max`).
const SYNTH_X_COND: f64 = 0.01;
const SYNTH_X_BOX: f64 = 5.0;
const SYNTH_Y_BOX: f64 = 4.0;

/// Randomized search for `(X, Y)` maximizing the decay rate `ζ*` of
/// `AX + XAᵀ + BY + YᵀBᵀ + ζX ≺ 0`. `X` is normalized to `λ_max(X) = 1` and kept
/// well conditioned, both `XH + HX` keep a positivity margin, and `Y` lives in a
/// box, which bounds the gain. Several adaptive-step restarts; the best point wins.
/// `ζ₁` is half the achieved decay rate and `ζ₂, ζ₃` are the tight upper
/// constants plus 5%.
///
/// Deterministic for a given seed. Intended for `n ≤ 4`.
pub fn synthesize_lmi(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    nu1: f64,
    nu2: f64,
    r1: &[f64],
    r2: &[f64],
    seed: u64,
) -> Result<ILFParams> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != 1 || r1.len() != n || r2.len() != n {
        return Err(Error::invalid("synthesis needs A n×n, B n×1 and weight vectors of length n"));
    }
    if n > 4 {
        return Err(Error::invalid("randomized LMI synthesis supports n ≤ 4"));
    }
    if !is_controllable(a, b) {
        return Err(Error::SynthesisFailure("(A, B) is not controllable".into()));
    }
    let prob = SynthesisProblem { a, b, r1, r2, n };
    let nx = n * (n + 1) / 2;
    let dim = nx + n;
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    let mut p = Vec::with_capacity(dim);
    for i in 0..n {
        for j in i..n {
            if i == j {
                lo.push(1e-3);
                hi.push(SYNTH_X_BOX);
                p.push(1.0);
            } else {
                lo.push(-SYNTH_X_BOX);
                hi.push(SYNTH_X_BOX);
                p.push(0.0);
            }
        }
    }
    for i in 0..n {
        lo.push(-SYNTH_Y_BOX);
        hi.push(SYNTH_Y_BOX);
        p.push(-b[(i, 0)]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_p = p.clone();
    let mut best = prob.objective(&p);
    for restart in 0..SYNTH_RESTARTS {
        let mut cur = if restart == 0 {
            p.clone()
        } else {
            (0..dim).map(|i| rng.gen_range(lo[i]..hi[i])).collect()
        };
        let mut cur_val = prob.objective(&cur);
        let mut step = 0.3;
        for _ in 0..SYNTH_ITERS {
            let cand: Vec<f64> = (0..dim)
                .map(|i| {
                    let z = rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0);
                    (cur[i] + step * z * (hi[i] - lo[i])).clamp(lo[i], hi[i])
                })
                .collect();
            let val = prob.objective(&cand);
            if val >= cur_val {
                cur = cand;
                cur_val = val;
                step = (step * 1.3).min(0.5);
            } else {
                step = (step * 0.97).max(1e-9);
            }
        }
        if cur_val > best {
            best = cur_val;
            best_p = cur;
        }
    }
    let p = best_p;
    if !(best > 0.0) {
        return Err(Error::SynthesisFailure(format!("no feasible point found (best margin {best:e})")));
    }
    let (x, y) = prob.unpack_normalized(&p).expect("objective was finite");
    let m = lyapunov_lhs(a, b, &x, &y);
    let decay_rate = -relative_extremes(&x, &m, true).expect("objective was finite");
    let zeta2 = 1.05 * relative_extremes(&x, &sym_weight_product(&x, r1), true).expect("X ≻ 0");
    let zeta3 = 1.05 * relative_extremes(&x, &sym_weight_product(&x, r2), true).expect("X ≻ 0");
    let params = ILFParams::new(x, y, nu1, nu2, r1.to_vec(), r2.to_vec(), [0.5 * decay_rate, zeta2, zeta3])
        .map_err(|e| Error::SynthesisFailure(e.to_string()))?;
    let margins = verify_lmi(a, b, &params)?;
    if !margins.passed() {
        return Err(Error::SynthesisFailure(format!("synthesized point fails verification: {margins:?}")));
    }
    Ok(params)
}

/// The ILF feedback bound to a linear plant part `(A, B)`.
#[derive(Debug, Clone)]
pub struct IlfController {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    params: ILFParams,
    cfg: ILFSolveConfig,
}

/// States whose ellipsoid form is within this distance of 1 are treated as on the surface.
const SURFACE_BAND: f64 = 1e-12;

impl IlfController {
    /// Requires the matrix inequalities to hold for `(A, B)`.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, params: ILFParams, cfg: ILFSolveConfig) -> Result<Self> {
        cfg.validate()?;
        let margins = verify_lmi(&a, &b, &params)?;
        if !margins.passed() {
            return Err(Error::invalid(format!("ILF parameters violate the matrix inequalities: {margins:?}")));
        }
        Ok(Self { a, b, params, cfg })
    }

    pub fn params(&self) -> &ILFParams {
        &self.params
    }

    pub fn config(&self) -> &ILFSolveConfig {
        &self.cfg
    }

    /// `ζ₁/ζ₂` and `ζ₁/ζ₃`: guaranteed decay rates inside and outside the ellipsoid.
    pub fn decay_rates(&self) -> (f64, f64) {
        let [z1, z2, z3] = self.params.zeta;
        (z1 / z2, z1 / z3)
    }

    fn nominal_velocity(&self, x: &[f64], u: f64) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.a[(i, j)] * x[j]).sum::<f64>() + self.b[(i, 0)] * u)
            .collect()
    }
}

impl FixedTimeController for IlfController {
    fn control(&self, x: &[f64]) -> Result<f64> {
        u_fxts(x, &self.params, &self.cfg)
    }

    fn lyapunov(&self, x: &[f64]) -> Result<f64> {
        if x.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        solve_ilf(x, &self.params, &self.cfg)
    }

    fn lyapunov_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; x.len()]);
        }
        if (self.params.ellipsoid_form(x) - 1.0).abs() <= SURFACE_BAND {
            let u = self.control(x)?;
            return ilf_gradient_on_surface(x, &self.nominal_velocity(x, u), &self.params);
        }
        let (v, region) = locate(x, &self.params, &self.cfg)?;
        ilf_gradient_in(x, v, &self.params, region)
    }
}
