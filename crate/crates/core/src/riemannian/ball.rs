use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::mesh::MeshDomain;
use crate::error::{LabError, Result};

/// Quadrature weights for a geodesic ball `B_σ(x₀)` and its boundary sphere.
///
/// The sphere is a shell of one mesh layer: each vertex at distance `r`
/// carries `μ_v · max(0, 1 − |r − σ|/h)/h`, a hat kernel of unit mass in `r`.
/// Interior weights use the matching smoothed indicator (the integral of
/// the hat). Shell weights are then rescaled so their total is the model
/// circumference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRegion {
    pub center: usize,
    pub radius: f64,
    pub shell_width: f64,
    pub interior_weights: Vec<(usize, f64)>,
    pub boundary_weights: Vec<(usize, f64)>,
    /// Unit `∂/∂r` at each boundary vertex, in that vertex's own frame.
    pub radial_directions: Vec<[f64; 2]>,
    /// Normal coordinates (centred at `center`) of each boundary vertex.
    pub boundary_coords: Vec<[f64; 2]>,
    /// Normal coordinates of each interior vertex.
    pub interior_coords: Vec<[f64; 2]>,
}

impl BallRegion {
    pub fn volume(&self) -> f64 {
        self.interior_weights.iter().map(|(_, w)| w).sum()
    }

    pub fn area(&self) -> f64 {
        self.boundary_weights.iter().map(|(_, w)| w).sum()
    }

    pub fn integrate_interior<F: FnMut(usize) -> f64>(&self, mut f: F) -> f64 {
        self.interior_weights.iter().map(|&(v, w)| w * f(v)).sum()
    }

    pub fn integrate_boundary<F: FnMut(usize) -> f64>(&self, mut f: F) -> f64 {
        self.boundary_weights.iter().map(|&(v, w)| w * f(v)).sum()
    }
}

fn smoothed_indicator(s: f64) -> f64 {
    if s <= -1.0 {
        1.0
    } else if s < 0.0 {
        1.0 - 0.5 * (1.0 + s).powi(2)
    } else if s < 1.0 {
        0.5 * (1.0 - s).powi(2)
    } else {
        0.0
    }
}

/// Builds the ball and shell weights around `center`.
pub fn geodesic_ball_region(mesh: &MeshDomain, center: usize, sigma: f64) -> Result<BallRegion> {
    if center >= mesh.num_vertices() {
        return Err(LabError::InvalidParameter(format!("vertex {center} out of range")));
    }
    let h = mesh.mesh_size();
    if !(sigma >= 3.0 * h * (1.0 - 1e-12)) {
        return Err(LabError::UnderResolved { sigma, min: 3.0 * h });
    }
    let clearance = mesh.clearance(center);
    if sigma + h > clearance {
        return Err(LabError::OutOfDomain { center, sigma, clearance });
    }
    let reach = sigma + h;
    let mut seen = vec![false; mesh.num_vertices()];
    let mut queue = VecDeque::from([center]);
    seen[center] = true;
    let mut support = Vec::new();
    while let Some(v) = queue.pop_front() {
        let x = mesh.log_map(center, v);
        let r = x[0].hypot(x[1]);
        if r >= reach {
            continue;
        }
        support.push((v, x, r));
        for &q in mesh.ring(v) {
            if !seen[q] {
                seen[q] = true;
                queue.push_back(q);
            }
        }
    }
    support.sort_by_key(|s| s.0);
    let mut region = BallRegion {
        center,
        radius: sigma,
        shell_width: h,
        interior_weights: Vec::new(),
        boundary_weights: Vec::new(),
        radial_directions: Vec::new(),
        boundary_coords: Vec::new(),
        interior_coords: Vec::new(),
    };
    for (v, x, r) in support {
        let mu = mesh.measure(v);
        let s = (r - sigma) / h;
        let chi = smoothed_indicator(s);
        if chi > 0.0 {
            region.interior_weights.push((v, mu * chi));
            region.interior_coords.push(x);
        }
        let hat = (1.0 - s.abs()).max(0.0);
        if hat > 0.0 {
            let back = mesh.log_map(v, center);
            let n = back[0].hypot(back[1]);
            region.boundary_weights.push((v, mu * hat / h));
            region.radial_directions.push([-back[0] / n, -back[1] / n]);
            region.boundary_coords.push(x);
        }
    }
    // The shell mass fluctuates by a few percent with the lattice phase of
    // σ; rescale it to the model circumference.
    let exact = 2.0 * std::f64::consts::PI * mesh.tag().exact_model().profile(sigma);
    let area = region.area();
    if area > 0.0 {
        for (_, w) in &mut region.boundary_weights {
            *w *= exact / area;
        }
    }
    Ok(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riemannian::mesh::{build_mesh, DomainTag};
    use std::f64::consts::PI;

    #[test]
    fn flat_torus_ball() {
        let m = build_mesh(&DomainTag::FlatTorus { l1: 1.0, l2: 1.0 }, 50).unwrap();
        let b = geodesic_ball_region(&m, 0, 0.2).unwrap();
        let area = PI * 0.04;
        assert!(((b.volume() - area) / area).abs() < 0.05);
        let circ = 2.0 * PI * 0.2;
        assert!(((b.area() - circ) / circ).abs() < 0.05);
        for (d, x) in b.radial_directions.iter().zip(&b.boundary_coords) {
            let r = x[0].hypot(x[1]);
            assert!((d[0] - x[0] / r).abs() < 1e-12 && (d[1] - x[1] / r).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothed_indicator_is_integral_of_hat() {
        let n = 20000;
        let mut acc = 0.0;
        for i in 0..n {
            let s = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            acc += (1.0 - s.abs()) * 2.0 / n as f64;
            let next = 1.0 - 2.0 * (i + 1) as f64 / n as f64;
            assert!((smoothed_indicator(next) - acc).abs() < 1e-6);
        }
    }

    #[test]
    fn under_resolved_and_out_of_domain() {
        let m = build_mesh(&DomainTag::FlatTorus { l1: 1.0, l2: 1.0 }, 20).unwrap();
        assert!(matches!(
            geodesic_ball_region(&m, 0, 0.1),
            Err(LabError::UnderResolved { .. })
        ));
        assert!(matches!(
            geodesic_ball_region(&m, 0, 0.48),
            Err(LabError::OutOfDomain { .. })
        ));
        let sq = build_mesh(&DomainTag::FlatSquare, 20).unwrap();
        assert!(matches!(
            geodesic_ball_region(&sq, 21 * 3 + 3, 0.16),
            Err(LabError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn sphere_cap() {
        let m = build_mesh(&DomainTag::RoundSphere { radius: 1.0 }, 24).unwrap();
        let b = geodesic_ball_region(&m, 0, 0.3).unwrap();
        let cap = 2.0 * PI * (1.0 - 0.3f64.cos());
        assert!(((b.volume() - cap) / cap).abs() < 0.05, "{} vs {cap}", b.volume());
        let circ = 2.0 * PI * 0.3f64.sin();
        assert!(((b.area() - circ) / circ).abs() < 0.05);
    }
}
