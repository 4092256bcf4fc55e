//! Numerical laboratory for harmonic maps from discretized Riemannian domains
//! into non-positively curved (NPC) and CAT(-1) metric spaces.
//!
//! The crate is organised in four layers:
//!
//! * [`riemannian`]: curvature symbols, normal-coordinate expansions,
//!   quadratic-form quadrature, Bishop–Gromov profiles and model meshes.
//! * [`targets`]: Euclidean spaces, metric trees, the hyperbolic plane and
//!   their products, with geodesics, comparison-triangle checks and weighted
//!   Fréchet means.
//! * [`solver`]: discrete Dirichlet energy, Gauss–Seidel / Jacobi relaxation
//!   towards energy minimizers, and pull-back tensor estimates.
//! * [`analysis`]: radial profiles `E(σ)`, `I(σ)`, the order function,
//!   variation-formula margins, mean-value and Bochner residuals, and the
//!   conformal / totally-geodesic / Lipschitz corollary checks.

pub mod analysis;
pub mod error;
pub mod riemannian;
pub mod solver;
pub mod targets;

pub use error::{LabError, Result};

pub use analysis::{BochnerReport, InequalityMargin, RadialProfile};
pub use riemannian::{
    BallRegion, CurvatureData, DomainTag, ExactModel, MeshDomain, NormalChart, QuadraticForm,
};
pub use solver::{MapState, PullbackTensor, SolverConfig};
pub use targets::{CurvatureClass, TargetPoint, TargetSpace};

/// Volume of the unit ball in Euclidean `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}
