use thiserror::Error;

use crate::targets::TargetPoint;

/// Errors raised by the geometry, target, solver and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point at |x| = {norm} lies outside the chart (validity radius {radius})")]
    OutOfChart { norm: f64, radius: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh construction failed: {0}")]
    MeshConstruction(String),

    #[error("ball of radius {sigma} is under-resolved (needs at least {min})")]
    UnderResolved { sigma: f64, min: f64 },

    #[error("ball of radius {sigma} around vertex {center} leaves the domain (clearance {clearance})")]
    OutOfDomain { center: usize, sigma: f64, clearance: f64 },

    #[error("mismatched target spaces: {0}")]
    SpaceMismatch(String),

    #[error("interpolation parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),

    #[error("comparison triangle with sides ({0}, {1}, {2}) violates the triangle inequality")]
    TriangleInequality(f64, f64, f64),

    #[error("did not converge after {iterations} iterations (residual {residual})")]
    Divergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<TargetPoint>>,
    },

    #[error("rank-deficient direction set for tensor estimate at vertex {0}")]
    RankDeficient(usize),

    #[error("quantity undefined: {0}")]
    Undefined(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Serialization(e.to_string())
    }
}
