//! Output finite-time and fixed-time stabilization toolkit.
//!
//! The crate is organized around the objects a control engineer touches when
//! designing and auditing non-asymptotic regulators:
//!
//! - [`homogeneity`]: weighted dilations, homogeneous norms, signed powers and
//!   sample-based homogeneity checks.
//! - [`dynamics`]: [`SystemModel`](dynamics::SystemModel), the built-in example
//!   systems, the uncertain plant `ẋ = Ax + B(φ(x)ᵀθ + u)` and adaptive loop assembly.
//! - [`controllers`]: the homogeneous finite-time double-integrator controller,
//!   its Lyapunov function, and the adaptive finite-time / fixed-time laws.
//! - [`ilf`]: implicit Lyapunov function fixed-time controller (bisection solve,
//!   implicit-function gradient, LMI verification and synthesis).
//! - [`sim`]: fixed-step integration, settling detection and batch runs.
//! - [`certify`]: sufficient-condition audits for output finite/fixed-time
//!   stability and the closed-form settling-time bounds.
//! - [`scenario`]: built-in and file-driven scenarios producing CSV and JSON artifacts.

pub mod certify;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod homogeneity;
pub mod ilf;
pub mod linalg;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
