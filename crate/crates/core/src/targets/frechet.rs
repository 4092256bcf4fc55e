use serde::{Deserialize, Serialize};

use super::{hyperbolic, TargetPoint, TargetSpace};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrechetConfig {
    /// Bound on the norm of the averaged log map at the returned point.
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 1000,
            damping: 0.5,
        }
    }
}

/// `Σ wᵢ d²(pᵢ, x)`.
pub fn mean_objective(space: &TargetSpace, points: &[(&TargetPoint, f64)], x: &TargetPoint) -> Result<f64> {
    points
        .iter()
        .map(|(p, w)| Ok(w * space.distance(p, x)?.powi(2)))
        .sum()
}

/// Minimizer of `Σ wᵢ d²(pᵢ, ·)`.
pub fn frechet_mean(
    space: &TargetSpace,
    points: &[(&TargetPoint, f64)],
    config: &FrechetConfig,
) -> Result<TargetPoint> {
    if points.is_empty() {
        return Err(LabError::InvalidParameter("Fréchet mean of no points".into()));
    }
    if points.iter().any(|(_, w)| !(*w >= 0.0)) {
        return Err(LabError::InvalidParameter("negative Fréchet weight".into()));
    }
    let total: f64 = points.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(LabError::InvalidParameter("Fréchet weights sum to zero".into()));
    }
    if points.len() == 1 {
        space.contains(points[0].0)?;
        return Ok(points[0].0.clone());
    }
    match space {
        TargetSpace::Euclidean { dim } => {
            let mut acc = vec![0.0; *dim];
            for (p, w) in points {
                let TargetPoint::Euclidean(x) = p else {
                    return Err(LabError::SpaceMismatch(format!("{p:?} is not euclidean")));
                };
                if x.len() != *dim {
                    return Err(LabError::DimensionMismatch {
                        expected: *dim,
                        found: x.len(),
                    });
                }
                for (a, xi) in acc.iter_mut().zip(x) {
                    *a += w * xi;
                }
            }
            Ok(TargetPoint::Euclidean(acc.into_iter().map(|a| a / total).collect()))
        }
        TargetSpace::Tree(tree) => {
            let pts = points
                .iter()
                .map(|(p, w)| match p {
                    TargetPoint::Tree { edge, offset } if *edge < tree.edges().len() => {
                        Ok(((*edge, *offset), *w))
                    }
                    _ => Err(LabError::SpaceMismatch(format!("{p:?} is not a tree point"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let ((edge, offset), _) = tree.frechet_mean(&pts);
            Ok(TargetPoint::Tree { edge, offset })
        }
        TargetSpace::HyperbolicPlane => {
            let pts = points
                .iter()
                .map(|(p, w)| match p {
                    TargetPoint::Hyperbolic(x) => Ok((*x, *w)),
                    _ => Err(LabError::SpaceMismatch(format!("{p:?} is not hyperbolic"))),
                })
                .collect::<Result<Vec<_>>>()?;
            hyperbolic_mean(&pts, total, config).map(TargetPoint::Hyperbolic)
        }
        TargetSpace::Product { factors } => {
            let mut parts = Vec::with_capacity(factors.len());
            for (k, f) in factors.iter().enumerate() {
                let comp = points
                    .iter()
                    .map(|(p, w)| match p {
                        TargetPoint::Product(c) if c.len() == factors.len() => Ok((&c[k], *w)),
                        _ => Err(LabError::SpaceMismatch(format!("{p:?} is not a product point"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                parts.push(frechet_mean(f, &comp, config)?);
            }
            Ok(TargetPoint::Product(parts))
        }
    }
}

/// Damped fixed-point iteration `p ← exp_p(damping · mean log_p)` started
/// from the normalized Minkowski centroid.
fn hyperbolic_mean(points: &[([f64; 3], f64)], total: f64, config: &FrechetConfig) -> Result<[f64; 3]> {
    let mut m = [0.0; 3];
    for (p, w) in points {
        for k in 0..3 {
            m[k] += w * p[k];
        }
    }
    let s = (-hyperbolic::minkowski(&m, &m)).sqrt();
    let mut x = hyperbolic::renormalize([0.0, m[1] / s, m[2] / s]);
    let mut residual = f64::INFINITY;
    for _ in 0..config.max_iters {
        let mut g = [0.0; 3];
        for (p, w) in points {
            let v = hyperbolic::log_map(&x, p);
            for k in 0..3 {
                g[k] += w * v[k] / total;
            }
        }
        residual = hyperbolic::tangent_norm(&g);
        if residual <= config.tol {
            return Ok(x);
        }
        let step = [config.damping * g[0], config.damping * g[1], config.damping * g[2]];
        x = hyperbolic::exp_map(&x, &step);
    }
    Err(LabError::Divergence {
        iterations: config.max_iters,
        residual,
        best: Some(Box::new(TargetPoint::Hyperbolic(x))),
    })
}
