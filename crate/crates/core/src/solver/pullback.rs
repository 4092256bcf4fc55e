use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MapState;
use crate::error::{LabError, Result};
use crate::riemannian::{geodesic_ball_region, MeshDomain};

/// Pull-back metric `π_ij` at a vertex, in the vertex's normal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackTensor {
    pub vertex: usize,
    /// Sampling radius; zero for one-ring estimates.
    pub eps: f64,
    pub matrix: DMatrix<f64>,
}

impl PullbackTensor {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self, slack: f64) -> bool {
        self.min_eigenvalue() >= -slack
    }
}

/// Least-squares fit of `d² ≈ xᵀPx` with relative weighting.
fn fit_quadratic(samples: impl Iterator<Item = ([f64; 2], f64, f64)>) -> Option<DMatrix<f64>> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let mut count = 0;
    for (x, d2, w) in samples {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 || w <= 0.0 {
            continue;
        }
        let wt = w / (r2 * r2);
        let f = Vector3::new(x[0] * x[0], 2.0 * x[0] * x[1], x[1] * x[1]);
        ata += wt * f * f.transpose();
        atb += wt * d2 * f;
        count += 1;
    }
    if count < 3 {
        return None;
    }
    let eig = SymmetricEigen::new(ata);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    if !(lo > 1e-10 * hi) {
        return None;
    }
    let p = ata.cholesky()?.solve(&atb);
    Some(DMatrix::from_row_slice(2, 2, &[p[0], p[1], p[1], p[2]]))
}

/// Polarization of `d²(u(x), u(v))` over the geodesic sphere of radius `eps`.
pub fn pullback_tensor_estimate(mesh: &MeshDomain, map: &MapState, v: usize, eps: f64) -> Result<PullbackTensor> {
    let ball = geodesic_ball_region(mesh, v, eps)?;
    let samples = ball
        .boundary_weights
        .iter()
        .zip(&ball.boundary_coords)
        .map(|(&(q, w), x)| (*x, map.distance(v, q).powi(2), w));
    let matrix = fit_quadratic(samples).ok_or(LabError::RankDeficient(v))?;
    Ok(PullbackTensor { vertex: v, eps, matrix })
}

/// Same fit over the one-ring of `v`; exact for affine maps on flat meshes.
pub fn local_pullback(mesh: &MeshDomain, map: &MapState, v: usize) -> Result<PullbackTensor> {
    let samples = mesh
        .ring(v)
        .iter()
        .map(|&q| (mesh.log_map(v, q), map.distance(v, q).powi(2), 1.0));
    let matrix = fit_quadratic(samples).ok_or(LabError::RankDeficient(v))?;
    Ok(PullbackTensor { vertex: v, eps: 0.0, matrix })
}

/// Shell-averaged energy density `n Σ w d² / Σ w r²` on the `eps`-sphere.
pub fn energy_density(mesh: &MeshDomain, map: &MapState, v: usize, eps: f64) -> Result<f64> {
    let ball = geodesic_ball_region(mesh, v, eps)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&(q, w), x) in ball.boundary_weights.iter().zip(&ball.boundary_coords) {
        num += w * map.distance(v, q).powi(2);
        den += w * (x[0] * x[0] + x[1] * x[1]);
    }
    Ok(mesh.dimension() as f64 * num / den)
}

/// Per-vertex `(1/2μ_v) Σ_{e∋v} w_e d_e²`; sums to the Dirichlet energy
/// against the vertex measure.
pub fn edge_density(mesh: &MeshDomain, map: &MapState) -> Vec<f64> {
    let mut rho = vec![0.0; mesh.num_vertices()];
    for e in mesh.edges() {
        let c = 0.5 * e.w * map.distance(e.i, e.j).powi(2);
        rho[e.i] += c;
        rho[e.j] += c;
    }
    for (v, r) in rho.iter_mut().enumerate() {
        *r /= mesh.measure(v);
    }
    rho
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyDensityField {
    pub eps: f64,
    /// `|∇u|²` from edge differences.
    pub density: Vec<f64>,
    /// `tr π` of the `eps`-sphere tensor, where the sphere is resolved.
    pub trace: Vec<Option<f64>>,
    /// `e(x)`: shell density minus `tr π`.
    pub residual: Vec<Option<f64>>,
}

pub fn energy_density_field(mesh: &MeshDomain, map: &MapState, eps: f64) -> EnergyDensityField {
    let density = edge_density(mesh, map);
    let pairs: Vec<(Option<f64>, Option<f64>)> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            let tr = pullback_tensor_estimate(mesh, map, v, eps).ok().map(|p| p.trace());
            let shell = energy_density(mesh, map, v, eps).ok();
            (tr, shell.zip(tr).map(|(s, t)| s - t))
        })
        .collect();
    let (trace, residual) = pairs.into_iter().unzip();
    EnergyDensityField {
        eps,
        density,
        trace,
        residual,
    }
}
