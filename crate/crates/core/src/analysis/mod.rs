//! Radial profiles, inequality margins and Bochner residuals evaluated on a
//! fixed `(mesh, map)` snapshot.

mod bochner;
mod corollary;
mod radial;
mod variation;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::riemannian::{geodesic_ball_region, CurvatureData, MeshDomain};
use crate::solver::{edge_density, local_pullback, MapState, PullbackTensor};
use crate::targets::CurvatureClass;

pub use bochner::{bochner_residual, BochnerReport, BochnerRow};
pub use corollary::{
    conformal_bound_check, lipschitz_constant_estimate, totally_geodesic_check, ConformalReport,
    GeodesicSample, LipschitzEstimate,
};
pub use radial::{
    cauchy_schwarz_check, domain_variation_residual, domain_variation_rhs, energy_bound_check,
    flux_energy_check, mean_value_check, order_function, order_lower_bound, radial_profiles,
    RadialProfile,
};
pub use variation::{
    bump_function, cat1_target_variation_check, scalar_gradient, target_variation_check, Bump,
};

/// One evaluated inequality. `lhs` is always the side expected to be the
/// larger one, so `pass ⇔ lhs − rhs ≥ −tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityMargin {
    pub check: String,
    pub vertex: usize,
    pub sigma: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityMargin {
    pub fn new(check: &str, vertex: usize, sigma: Option<f64>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = lhs - rhs;
        Self {
            check: check.to_string(),
            vertex,
            sigma,
            lhs,
            rhs,
            margin,
            tolerance,
            pass: margin >= -tolerance,
        }
    }

    pub fn csv_header() -> &'static str {
        "check,vertex,sigma,lhs,rhs,margin,pass"
    }

    pub fn csv_row(&self) -> String {
        let sigma = self.sigma.map_or(String::new(), |s| format!("{s:.17e}"));
        format!(
            "{},{},{},{:.17e},{:.17e},{:.17e},{}",
            self.check, self.vertex, sigma, self.lhs, self.rhs, self.margin, self.pass
        )
    }
}

/// Per-vertex quantities shared by every check: the one-ring pull-back
/// tensor and two density estimates.
#[derive(Debug, Clone)]
pub struct MapSnapshot<'a> {
    pub mesh: &'a MeshDomain,
    pub map: &'a MapState,
    /// Ring-fitted `π` at each vertex, in that vertex's frame.
    pub tensors: Vec<Option<PullbackTensor>>,
    /// `tr π` where the ring fit succeeded, else the edge density.
    pub density: Vec<f64>,
    /// `(1/2μ_v) Σ w_e d_e²`.
    pub edge_density: Vec<f64>,
}

impl<'a> MapSnapshot<'a> {
    pub fn new(mesh: &'a MeshDomain, map: &'a MapState) -> Result<Self> {
        if map.values.len() != mesh.num_vertices() {
            return Err(LabError::DimensionMismatch {
                expected: mesh.num_vertices(),
                found: map.values.len(),
            });
        }
        let tensors: Vec<Option<PullbackTensor>> = (0..mesh.num_vertices())
            .into_par_iter()
            .map(|v| local_pullback(mesh, map, v).ok())
            .collect();
        let edge_density = edge_density(mesh, map);
        let density = tensors
            .iter()
            .zip(&edge_density)
            .map(|(t, &e)| t.as_ref().map_or(e, |t| t.trace()))
            .collect();
        Ok(Self {
            mesh,
            map,
            tensors,
            density,
            edge_density,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mesh.dimension()
    }

    pub fn tensor(&self, v: usize) -> Result<&PullbackTensor> {
        self.tensors[v].as_ref().ok_or(LabError::RankDeficient(v))
    }

    /// `π(d, d)` at `v` for a direction `d` in `v`'s frame.
    pub fn directional(&self, v: usize, d: [f64; 2]) -> Option<f64> {
        self.tensors[v].as_ref().map(|t| {
            let m = &t.matrix;
            m[(0, 0)] * d[0] * d[0] + 2.0 * m[(0, 1)] * d[0] * d[1] + m[(1, 1)] * d[1] * d[1]
        })
    }

    pub fn max_density(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }

    /// `(Ric:π, π:π, |∇u|⁴)` at `v`.
    pub fn contractions(&self, v: usize) -> Result<(f64, f64, f64)> {
        contract_tensors(self.mesh.curvature(v), &self.tensor(v)?.matrix)
    }
}

/// `(Ric:π, π:π, (tr π)²)` in an orthonormal frame.
pub fn contract_tensors(curvature: &CurvatureData, pi: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    let n = curvature.dimension();
    if pi.nrows() != n || pi.ncols() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            found: pi.nrows(),
        });
    }
    let ric_pi = curvature.ricci().component_mul(pi).sum();
    let pi_pi = pi.component_mul(pi).sum();
    let tr = pi.trace();
    Ok((ric_pi, pi_pi, tr * tr))
}

/// Coefficient of `σ²` in the lower bound for `(1/|∇u|²)·` the mean-value
/// and order deficits: `Ric:π` for NPC targets and `Ric:π + |∇u|⁴ − π:π`
/// for CAT(-1) targets.
pub(crate) fn curvature_term(class: CurvatureClass, (ric_pi, pi_pi, density_sq): (f64, f64, f64)) -> f64 {
    match class {
        CurvatureClass::Npc => ric_pi,
        CurvatureClass::CatMinus1 => ric_pi + density_sq - pi_pi,
    }
}

/// Ball-average estimate of `Δf` at `v`.
///
/// Uses `2n(avg f − f(v))/avg|x|²`, which is `2(n+2)(avg f − f(v))/σ²` with
/// the second moment of the discrete ball in place of its continuum value.
pub fn weak_laplacian(mesh: &MeshDomain, field: &[f64], v: usize, sigma: f64) -> Result<f64> {
    if field.len() != mesh.num_vertices() {
        return Err(LabError::DimensionMismatch {
            expected: mesh.num_vertices(),
            found: field.len(),
        });
    }
    let ball = geodesic_ball_region(mesh, v, sigma)?;
    let mut vol = 0.0;
    let mut avg = 0.0;
    let mut moment = 0.0;
    for (&(q, w), x) in ball.interior_weights.iter().zip(&ball.interior_coords) {
        vol += w;
        avg += w * field[q];
        moment += w * (x[0] * x[0] + x[1] * x[1]);
    }
    let n = mesh.dimension() as f64;
    Ok(2.0 * n * (avg / vol - field[v]) / (moment / vol))
}

/// Weighted least-squares fit of `y ≈ c₀ + c₂σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of `slope`; zero when the fit is exact or has no
    /// residual degrees of freedom.
    pub slope_error: f64,
}

pub fn fit_sigma_squared(sigmas: &[f64], values: &[f64]) -> Result<LadderFit> {
    if sigmas.len() != values.len() {
        return Err(LabError::DimensionMismatch {
            expected: sigmas.len(),
            found: values.len(),
        });
    }
    if sigmas.len() < 2 {
        return Err(LabError::InvalidParameter("σ² fit needs two samples".into()));
    }
    let mut ata = Matrix2::<f64>::zeros();
    let mut atb = Vector2::<f64>::zeros();
    for (&s, &y) in sigmas.iter().zip(values) {
        let f = Vector2::new(1.0, s * s);
        ata += f * f.transpose();
        atb += y * f;
    }
    let inv = ata
        .try_inverse()
        .ok_or_else(|| LabError::InvalidParameter("σ² fit needs distinct radii".into()))?;
    let c = inv * atb;
    let dof = sigmas.len() as f64 - 2.0;
    let slope_error = if dof > 0.0 {
        let rss: f64 = sigmas
            .iter()
            .zip(values)
            .map(|(&s, &y)| (y - c[0] - c[1] * s * s).powi(2))
            .sum();
        (rss / dof * inv[(1, 1)]).sqrt()
    } else {
        0.0
    };
    Ok(LadderFit {
        intercept: c[0],
        slope: c[1],
        slope_error,
    })
}

/// Vertices satisfying the "almost every point" preconditions: interior,
/// density above `1e-6·max`, and a resolved ball of radius `sigma`.
pub fn eligible_vertices(snapshot: &MapSnapshot, sigma: f64) -> (Vec<usize>, usize) {
    let mesh = snapshot.mesh;
    let floor = 1e-6 * snapshot.max_density();
    let mut excluded = 0;
    let mut out = Vec::new();
    for v in 0..mesh.num_vertices() {
        let ok = !snapshot.map.is_fixed(mesh, v)
            && !mesh.is_boundary(v)
            && snapshot.density[v] > floor
            && snapshot.tensors[v].is_some()
            && sigma + mesh.mesh_size() <= mesh.clearance(v);
        if ok {
            out.push(v);
        } else {
            excluded += 1;
        }
    }
    (out, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riemannian::{build_mesh, DomainTag};
    use crate::solver::BoundaryCondition;
    use crate::targets::{TargetPoint, TargetSpace};

    #[test]
    fn contractions() {
        let flat = CurvatureData::flat(2).unwrap();
        assert_eq!(contract_tensors(&flat, &DMatrix::zeros(2, 2)).unwrap(), (0.0, 0.0, 0.0));
        let sphere = CurvatureData::space_form(2, 1.0).unwrap();
        let pi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.7, 2.5]));
        assert!((contract_tensors(&sphere, &pi).unwrap().0 - 3.2).abs() < 1e-15);
        let hyp = CurvatureData::space_form(2, -1.0).unwrap();
        let (a, b, c) = contract_tensors(&hyp, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!((a, b, c), (-2.0, 2.0, 4.0));
        assert!(contract_tensors(&hyp, &DMatrix::identity(3, 3)).is_err());
    }

    fn torus(k: usize) -> MeshDomain {
        build_mesh(&DomainTag::FlatTorus { l1: 1.0, l2: 1.0 }, k).unwrap()
    }

    #[test]
    fn weak_laplacian_fields() {
        let m = torus(64);
        let c = 32 * 64 + 32;
        let x0 = m.vertex(c).xyz;
        let rel = |q: usize| m.log_map(c, q);
        let affine: Vec<f64> = (0..m.num_vertices()).map(|q| 1.0 + 2.0 * rel(q)[0] - rel(q)[1]).collect();
        assert!(weak_laplacian(&m, &affine, c, 0.1).unwrap().abs() < 1e-10);
        let sq: Vec<f64> = (0..m.num_vertices()).map(|q| rel(q)[0].powi(2) + rel(q)[1].powi(2)).collect();
        assert!((weak_laplacian(&m, &sq, c, 0.1).unwrap() - 4.0).abs() < 1e-10);
        // x⁴ at x₀ = 0.5: Δ = 12·x₀² = 3
        let quartic: Vec<f64> = (0..m.num_vertices()).map(|q| (x0[0] + rel(q)[0]).powi(4)).collect();
        assert!((x0[0] - 0.5).abs() < 1e-15);
        let lap = weak_laplacian(&m, &quartic, c, 0.1).unwrap();
        assert!((lap - 3.0).abs() < 0.05, "{lap}");
    }

    #[test]
    fn sigma_squared_fit() {
        let s = [0.1, 0.2, 0.3, 0.4];
        let y: Vec<f64> = s.iter().map(|x| 2.0 - 0.5 * x * x).collect();
        let f = fit_sigma_squared(&s, &y).unwrap();
        assert!((f.intercept - 2.0).abs() < 1e-12 && (f.slope + 0.5).abs() < 1e-10);
        assert!(f.slope_error < 1e-8);
        assert!(fit_sigma_squared(&[0.1], &[1.0]).is_err());
    }

    #[test]
    fn margin_orientation() {
        let m = InequalityMargin::new("x", 3, Some(0.5), 1.0, 1.0 + 1e-9, 1e-8);
        assert!(m.pass && m.margin < 0.0);
        let m = InequalityMargin::new("x", 3, None, 1.0, 2.0, 1e-8);
        assert!(!m.pass);
        assert_eq!(m.csv_row().split(',').count(), 7);
    }

    #[test]
    fn snapshot_densities_agree_for_affine_maps() {
        let m = torus(16);
        let u = MapState::from_fn(&m, TargetSpace::Euclidean { dim: 1 }, BoundaryCondition::Periodic, |q| {
            TargetPoint::Euclidean(vec![m.log_map(0, q)[0] + 0.3 * m.log_map(0, q)[1]])
        })
        .unwrap();
        let s = MapSnapshot::new(&m, &u).unwrap();
        assert!((s.density[0] - 1.09).abs() < 1e-12);
        assert!((s.edge_density[0] - 1.09).abs() < 1e-12);
        assert!((s.directional(0, [1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }
}
