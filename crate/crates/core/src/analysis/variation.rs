use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{InequalityMargin, MapSnapshot};
use crate::error::{LabError, Result};
use crate::riemannian::{geodesic_ball_region, MeshDomain};
use crate::targets::{TargetPoint, TargetSpace};

/// Least-squares gradient of a scalar field over the one-ring of `v`, in
/// `v`'s frame.
pub fn scalar_gradient<F: Fn(usize) -> f64>(mesh: &MeshDomain, v: usize, f: F) -> Option<[f64; 2]> {
    let f0 = f(v);
    let mut ata = Matrix2::<f64>::zeros();
    let mut atb = Vector2::<f64>::zeros();
    for &q in mesh.ring(v) {
        let x = mesh.log_map(v, q);
        let a = Vector2::new(x[0], x[1]);
        ata += a * a.transpose();
        atb += (f(q) - f0) * a;
    }
    let g = ata.try_inverse()? * atb;
    Some([g[0], g[1]])
}

/// Test function `η = max(0, 1 − r²/radius²)²` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: usize,
    pub radius: f64,
    /// Dense values, zero off the support.
    pub values: Vec<f64>,
    /// `‖η‖ = ∫ η dμ`.
    pub mass: f64,
}

/// Builds a bump whose support stays clear of the boundary.
pub fn bump_function(mesh: &MeshDomain, center: usize, radius: f64) -> Result<Bump> {
    let ball = geodesic_ball_region(mesh, center, radius)?;
    let mut values = vec![0.0; mesh.num_vertices()];
    let mut mass = 0.0;
    for (&(q, _), x) in ball.interior_weights.iter().zip(&ball.interior_coords) {
        let s = (x[0] * x[0] + x[1] * x[1]) / (radius * radius);
        if s < 1.0 {
            if mesh.is_boundary(q) {
                return Err(LabError::OutOfDomain {
                    center,
                    sigma: radius,
                    clearance: mesh.clearance(center),
                });
            }
            values[q] = (1.0 - s).powi(2);
            mass += mesh.measure(q) * values[q];
        }
    }
    Ok(Bump {
        center,
        radius,
        values,
        mass,
    })
}

/// `∫(Δη) f dμ` with the graph Laplacian `(Δη)_v = (1/μ_v)Σ w(η_j − η_v)`.
fn weak_integral(mesh: &MeshDomain, eta: &[f64], f: &[f64]) -> f64 {
    mesh.edges()
        .iter()
        .filter(|e| eta[e.i] != 0.0 || eta[e.j] != 0.0)
        .map(|e| e.w * (eta[e.j] - eta[e.i]) * (f[e.i] - f[e.j]))
        .sum()
}

fn squared_distances(snapshot: &MapSnapshot, q: &TargetPoint, bump: &Bump) -> Result<Vec<f64>> {
    let mesh = snapshot.mesh;
    let mut out = vec![0.0; mesh.num_vertices()];
    // the weak integral and the ring gradients only see the support and
    // its one-ring
    for v in 0..mesh.num_vertices() {
        if bump.values[v] != 0.0 {
            out[v] = snapshot.map.space.distance(&snapshot.map.values[v], q)?.powi(2);
            for &j in mesh.ring(v) {
                out[j] = snapshot.map.space.distance(&snapshot.map.values[j], q)?.powi(2);
            }
        }
    }
    Ok(out)
}

/// `∫(Δη)d²(u,Q) ≥ 2∫η|∇u|²`, with tolerance `tol·‖η‖`.
pub fn target_variation_check(snapshot: &MapSnapshot, q: &TargetPoint, bump: &Bump, tol: f64) -> Result<InequalityMargin> {
    snapshot.map.space.contains(q)?;
    let d2 = squared_distances(snapshot, q, bump)?;
    let lhs = weak_integral(snapshot.mesh, &bump.values, &d2);
    let rhs: f64 = (0..d2.len())
        .filter(|&v| bump.values[v] != 0.0)
        .map(|v| 2.0 * snapshot.mesh.measure(v) * bump.values[v] * snapshot.edge_density[v])
        .sum();
    Ok(InequalityMargin::new(
        "target_variation",
        bump.center,
        Some(bump.radius),
        lhs,
        rhs,
        tol * bump.mass,
    ))
}

/// The CAT(-1) strengthening: the right side gains
/// `2∫η(d coth d − 1)(|∇u|² − |∇d(u,Q)|²)`.
pub fn cat1_target_variation_check(
    snapshot: &MapSnapshot,
    q: &TargetPoint,
    bump: &Bump,
    tol: f64,
) -> Result<InequalityMargin> {
    if !matches!(snapshot.map.space, TargetSpace::HyperbolicPlane) {
        return Err(LabError::SpaceMismatch(format!(
            "CAT(-1) target variation needs the hyperbolic plane, got {}",
            snapshot.map.space.label()
        )));
    }
    snapshot.map.space.contains(q)?;
    let mesh = snapshot.mesh;
    let d2 = squared_distances(snapshot, q, bump)?;
    let lhs = weak_integral(mesh, &bump.values, &d2);
    let mut rhs = 0.0;
    for v in 0..d2.len() {
        let eta = bump.values[v];
        if eta == 0.0 {
            continue;
        }
        let rho = snapshot.edge_density[v];
        let d = d2[v].sqrt();
        let extra = if d > 1e-8 {
            let g = scalar_gradient(mesh, v, |j| d2[j].sqrt()).ok_or(LabError::RankDeficient(v))?;
            let grad_sq = g[0] * g[0] + g[1] * g[1];
            (d / d.tanh() - 1.0) * (rho - grad_sq)
        } else {
            0.0
        };
        rhs += 2.0 * mesh.measure(v) * eta * (rho + extra);
    }
    Ok(InequalityMargin::new(
        "cat1_target_variation",
        bump.center,
        Some(bump.radius),
        lhs,
        rhs,
        tol * bump.mass,
    ))
}
