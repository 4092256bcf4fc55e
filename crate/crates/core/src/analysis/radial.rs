use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{contract_tensors, curvature_term, scalar_gradient, InequalityMargin, MapSnapshot};
use crate::error::{LabError, Result};
use crate::riemannian::{geodesic_ball_region, CurvatureData};
use crate::targets::{CurvatureClass, TargetPoint};
use crate::unit_ball_volume;

/// Ball and sphere integrals around one basepoint on a ladder of radii.
///
/// Radii whose ball is under-resolved or leaves the domain are dropped, so
/// every vector has the length of `sigmas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub basepoint: usize,
    pub sigmas: Vec<f64>,
    /// `∫_{B_σ} |∇u|² dμ`.
    pub energy: Vec<f64>,
    /// `∫_{∂B_σ} d²(u, Q) dΣ`.
    pub height: Vec<f64>,
    /// `∫_{∂B_σ} |∂u/∂r|² dΣ`.
    pub flux: Vec<f64>,
    /// `∫_{∂B_σ} |∇u|² dΣ`.
    pub boundary_energy: Vec<f64>,
    /// `∫_{∂B_σ} ∂_r d²(u, Q) dΣ`.
    pub height_derivative: Vec<f64>,
    /// `Vol(B_σ)` as seen by the discrete weights.
    pub volume: Vec<f64>,
    /// `Q = u(basepoint)`.
    pub reference: TargetPoint,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// Plot-ready `(σ, value)` series keyed by name.
    pub fn series(&self) -> Vec<(&'static str, Vec<(f64, f64)>)> {
        let zip = |v: &[f64]| self.sigmas.iter().cloned().zip(v.iter().cloned()).collect();
        vec![
            ("energy", zip(&self.energy)),
            ("height", zip(&self.height)),
            ("flux", zip(&self.flux)),
        ]
    }
}

pub fn radial_profiles(snapshot: &MapSnapshot, basepoint: usize, sigmas: &[f64]) -> Result<RadialProfile> {
    let mesh = snapshot.mesh;
    let map = snapshot.map;
    if basepoint >= mesh.num_vertices() {
        return Err(LabError::InvalidParameter(format!("vertex {basepoint} out of range")));
    }
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidParameter("radii must be increasing".into()));
    }
    let reference = map.values[basepoint].clone();
    let dist_to_q = |q: usize| map.distance(q, basepoint);
    let mut p = RadialProfile {
        basepoint,
        sigmas: Vec::new(),
        energy: Vec::new(),
        height: Vec::new(),
        flux: Vec::new(),
        boundary_energy: Vec::new(),
        height_derivative: Vec::new(),
        volume: Vec::new(),
        reference,
    };
    for &sigma in sigmas {
        let ball = match geodesic_ball_region(mesh, basepoint, sigma) {
            Ok(b) => b,
            Err(e @ (LabError::UnderResolved { .. } | LabError::OutOfDomain { .. })) => {
                log::warn!("vertex {basepoint}: skipping σ = {sigma}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let energy = ball.integrate_interior(|q| snapshot.density[q]);
        let mut height = 0.0;
        let mut flux = 0.0;
        let mut boundary_energy = 0.0;
        let mut height_derivative = 0.0;
        for (&(q, w), dir) in ball.boundary_weights.iter().zip(&ball.radial_directions) {
            let d = dist_to_q(q);
            height += w * d * d;
            flux += w * snapshot.directional(q, *dir).unwrap_or(0.0);
            boundary_energy += w * snapshot.density[q];
            if let Some(g) = scalar_gradient(mesh, q, dist_to_q) {
                height_derivative += w * 2.0 * d * (g[0] * dir[0] + g[1] * dir[1]);
            }
        }
        p.sigmas.push(sigma);
        p.energy.push(energy);
        p.height.push(height);
        p.flux.push(flux);
        p.boundary_energy.push(boundary_energy);
        p.height_derivative.push(height_derivative);
        p.volume.push(ball.volume());
    }
    Ok(p)
}

/// `(σ, σE(σ)/I(σ))`; `None` where `I(σ) = 0`.
pub fn order_function(profile: &RadialProfile) -> Vec<(f64, Option<f64>)> {
    profile
        .sigmas
        .iter()
        .zip(profile.energy.iter().zip(&profile.height))
        .map(|(&s, (&e, &i))| (s, if i > 0.0 { Some(s * e / i) } else { None }))
        .collect()
}

/// `1 + Cσ²` with `C = (2Ric:π + extra)/(3(n+2)|∇u|²)`, where `extra` is
/// `|∇u|⁴ − π:π` for CAT(-1) targets and zero otherwise.
pub fn order_lower_bound(
    snapshot: &MapSnapshot,
    basepoint: usize,
    class: CurvatureClass,
    sigmas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let (ric_pi, pi_pi, dsq) = snapshot.contractions(basepoint)?;
    let rho = snapshot.density[basepoint];
    if !(rho > 0.0) {
        return Err(LabError::Undefined(format!("zero density at vertex {basepoint}")));
    }
    let n = snapshot.dimension() as f64;
    let extra = match class {
        CurvatureClass::Npc => 0.0,
        CurvatureClass::CatMinus1 => dsq - pi_pi,
    };
    let c = (2.0 * ric_pi + extra) / (3.0 * (n + 2.0) * rho);
    Ok(sigmas.iter().map(|&s| (s, 1.0 + c * s * s)).collect())
}

/// Leading term `ω_n(2Ric:π − S tr π)σ^{n+2}/(3(n+2))` of the domain
/// variation identity.
pub fn domain_variation_rhs(curvature: &CurvatureData, pi: &DMatrix<f64>, sigma: f64) -> Result<f64> {
    let (ric_pi, _, _) = contract_tensors(curvature, pi)?;
    let n = curvature.dimension();
    let nf = n as f64;
    Ok(unit_ball_volume(n) * (2.0 * ric_pi - curvature.scalar() * pi.trace()) * sigma.powi(n as i32 + 2)
        / (3.0 * (nf + 2.0)))
}

/// `(2−n)E + σ∫_{∂B}(|∇u|² − 2|∂u/∂r|²)` against its curvature expansion.
///
/// This is an identity up to `o(σ^{n+2})`; the margin records the remainder.
/// `tol` is relative to the size of the terms that cancel,
/// `|(2−n)E| + σ(∫_{∂B}|∇u|² + 2 flux)`.
pub fn domain_variation_residual(
    snapshot: &MapSnapshot,
    basepoint: usize,
    sigma: f64,
    tol: f64,
) -> Result<InequalityMargin> {
    let p = radial_profiles(snapshot, basepoint, &[sigma])?;
    if p.is_empty() {
        return Err(LabError::UnderResolved {
            sigma,
            min: 3.0 * snapshot.mesh.mesh_size(),
        });
    }
    let n = snapshot.dimension();
    let lhs = (2.0 - n as f64) * p.energy[0] + sigma * (p.boundary_energy[0] - 2.0 * p.flux[0]);
    let rhs = domain_variation_rhs(
        snapshot.mesh.curvature(basepoint),
        &snapshot.tensor(basepoint)?.matrix,
        sigma,
    )?;
    let scale = ((2.0 - n as f64) * p.energy[0]).abs() + sigma * (p.boundary_energy[0] + 2.0 * p.flux[0]);
    Ok(InequalityMargin::new("domain_variation", basepoint, Some(sigma), lhs, rhs, tol * scale))
}

/// `E(σ) ≤ factor·(I(σ)·flux(σ))^{1/2}` for every radius of the profile.
pub fn energy_bound_check(
    snapshot: &MapSnapshot,
    profile: &RadialProfile,
    class: CurvatureClass,
    rel_tol: f64,
) -> Result<Vec<InequalityMargin>> {
    let v = profile.basepoint;
    let rho = snapshot.density[v];
    let n = snapshot.dimension() as f64;
    let coeff = match class {
        CurvatureClass::CatMinus1 if rho > 0.0 => {
            let (_, pi_pi, dsq) = snapshot.contractions(v)?;
            (pi_pi - dsq) / (3.0 * (n + 2.0) * rho)
        }
        CurvatureClass::CatMinus1 => {
            log::warn!("vertex {v}: zero density, using the NPC energy bound");
            0.0
        }
        CurvatureClass::Npc => 0.0,
    };
    Ok((0..profile.len())
        .map(|k| {
            let s = profile.sigmas[k];
            let bound = (1.0 + coeff * s * s) * (profile.height[k] * profile.flux[k]).max(0.0).sqrt();
            let e = profile.energy[k];
            InequalityMargin::new("energy_bound", v, Some(s), bound, e, rel_tol * e.abs().max(bound.abs()))
        })
        .collect())
}

/// `σ·flux(σ) ≥ (1 + Aσ²)E(σ)`.
pub fn flux_energy_check(
    snapshot: &MapSnapshot,
    profile: &RadialProfile,
    class: CurvatureClass,
    rel_tol: f64,
) -> Result<Vec<InequalityMargin>> {
    let v = profile.basepoint;
    let rho = snapshot.density[v];
    let n = snapshot.dimension() as f64;
    let a = if rho > 0.0 {
        let (ric_pi, pi_pi, dsq) = snapshot.contractions(v)?;
        match class {
            CurvatureClass::Npc => 2.0 * ric_pi / (3.0 * (n + 2.0) * rho),
            CurvatureClass::CatMinus1 => (2.0 * ric_pi + 3.0 * dsq - 3.0 * pi_pi) / (3.0 * (n + 2.0) * rho),
        }
    } else {
        0.0
    };
    Ok((0..profile.len())
        .map(|k| {
            let s = profile.sigmas[k];
            let lhs = s * profile.flux[k];
            let rhs = (1.0 + a * s * s) * profile.energy[k];
            InequalityMargin::new("flux_energy", v, Some(s), lhs, rhs, rel_tol * lhs.abs().max(rhs.abs()))
        })
        .collect())
}

/// `avg_{B_σ}|∇u|² ≥ |∇u|²(x₀) + φσ²` with `φ = curvature term/(n+2)`.
pub fn mean_value_check(
    snapshot: &MapSnapshot,
    basepoint: usize,
    sigmas: &[f64],
    class: CurvatureClass,
    tol: f64,
) -> Result<Vec<InequalityMargin>> {
    let profile = radial_profiles(snapshot, basepoint, sigmas)?;
    let n = snapshot.dimension() as f64;
    let rho = snapshot.density[basepoint];
    let phi = if rho > 0.0 {
        curvature_term(class, snapshot.contractions(basepoint)?) / (n + 2.0)
    } else {
        0.0
    };
    Ok((0..profile.len())
        .map(|k| {
            let s = profile.sigmas[k];
            let avg = profile.energy[k] / profile.volume[k];
            InequalityMargin::new("mean_value", basepoint, Some(s), avg, rho + phi * s * s, tol)
        })
        .collect())
}

/// `4·I(σ)·flux(σ) ≥ (∫_{∂B}∂_r d²)²`.
pub fn cauchy_schwarz_check(profile: &RadialProfile, rel_tol: f64) -> Vec<InequalityMargin> {
    (0..profile.len())
        .map(|k| {
            let lhs = 4.0 * profile.height[k] * profile.flux[k];
            let rhs = profile.height_derivative[k].powi(2);
            InequalityMargin::new(
                "cauchy_schwarz",
                profile.basepoint,
                Some(profile.sigmas[k]),
                lhs,
                rhs,
                rel_tol * lhs.max(rhs),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riemannian::{build_mesh, DomainTag, MeshDomain};
    use crate::solver::{BoundaryCondition, MapState};
    use crate::targets::TargetSpace;
    use std::f64::consts::PI;

    fn torus(k: usize) -> MeshDomain {
        build_mesh(&DomainTag::FlatTorus { l1: 1.0, l2: 1.0 }, k).unwrap()
    }

    fn linear(m: &MeshDomain, c: usize) -> MapState {
        MapState::from_fn(m, TargetSpace::Euclidean { dim: 1 }, BoundaryCondition::Periodic, |q| {
            TargetPoint::Euclidean(vec![m.log_map(c, q)[0]])
        })
        .unwrap()
    }

    #[test]
    fn linear_map_profile() {
        let m = torus(80);
        let c = 40 * 80 + 40;
        let u = linear(&m, c);
        let s = MapSnapshot::new(&m, &u).unwrap();
        let sig = [0.1, 0.15, 0.2];
        let p = radial_profiles(&s, c, &sig).unwrap();
        for k in 0..3 {
            let sg = sig[k];
            // oracle: ∫_{B_σ} 1 = πσ², ∫_{∂B_σ} x² = πσ³ (Q = diag(1, 0))
            assert!((p.energy[k] / (PI * sg * sg) - 1.0).abs() < 0.05);
            assert!((p.height[k] / (PI * sg.powi(3)) - 1.0).abs() < 0.05);
            // ∫ cos²θ over the circle is πσ as well
            assert!((p.flux[k] / (PI * sg) - 1.0).abs() < 0.05);
            let order = order_function(&p)[k].1.unwrap();
            assert!((order - 1.0).abs() < 0.05, "{order}");
        }
        let dv = domain_variation_residual(&s, c, 0.15, 0.05).unwrap();
        assert!(dv.rhs == 0.0 && (dv.lhs / 0.15f64.powi(4)).abs() < 0.05);
        for mm in energy_bound_check(&s, &p, CurvatureClass::Npc, 1e-2).unwrap() {
            assert!(mm.pass, "{mm:?}");
        }
        for mm in flux_energy_check(&s, &p, CurvatureClass::Npc, 1e-2).unwrap() {
            assert!(mm.pass, "{mm:?}");
        }
        for mm in cauchy_schwarz_check(&p, 1e-9) {
            assert!(mm.pass, "{mm:?}");
        }
        for mm in mean_value_check(&s, c, &sig, CurvatureClass::Npc, 1e-9).unwrap() {
            assert!(mm.margin.abs() < 1e-9);
        }
    }

    #[test]
    fn constant_map_profile() {
        let m = torus(40);
        let u = MapState::from_fn(&m, TargetSpace::Euclidean { dim: 2 }, BoundaryCondition::Periodic, |_| {
            TargetPoint::Euclidean(vec![1.0, -2.0])
        })
        .unwrap();
        let s = MapSnapshot::new(&m, &u).unwrap();
        let p = radial_profiles(&s, 5, &[0.1, 0.2]).unwrap();
        assert!(p.energy.iter().chain(&p.height).chain(&p.flux).all(|&x| x == 0.0));
        assert!(order_function(&p).iter().all(|(_, o)| o.is_none()));
        let dv = domain_variation_residual(&s, 5, 0.2, 1e-9).unwrap();
        assert_eq!((dv.lhs, dv.rhs), (0.0, 0.0));
        for mm in energy_bound_check(&s, &p, CurvatureClass::CatMinus1, 0.0).unwrap() {
            assert!(mm.pass);
        }
    }

    #[test]
    fn unresolved_radii_are_skipped() {
        let m = torus(40);
        let u = linear(&m, 0);
        let s = MapSnapshot::new(&m, &u).unwrap();
        let p = radial_profiles(&s, 0, &[0.01, 0.1, 0.49]).unwrap();
        assert_eq!(p.sigmas, vec![0.1]);
    }

    #[test]
    fn domain_variation_sign_follows_curvature() {
        // n = 3, π = diag(1, 0, 0): 2Ric:π − S tr π = 2·2K − 6K = −2K
        let pi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let pos = domain_variation_rhs(&CurvatureData::space_form(3, 1.0).unwrap(), &pi, 0.3).unwrap();
        let neg = domain_variation_rhs(&CurvatureData::space_form(3, -1.0).unwrap(), &pi, 0.3).unwrap();
        let expect = -2.0 * unit_ball_volume(3) * 0.3f64.powi(5) / 15.0;
        assert!((pos - expect).abs() < 1e-15 && (neg + expect).abs() < 1e-15);
        // in n = 2 the bracket vanishes identically for every π
        let pi2 = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.2, 0.4]);
        let r2 = domain_variation_rhs(&CurvatureData::space_form(2, 1.0).unwrap(), &pi2, 0.3).unwrap();
        assert!(r2.abs() < 1e-15);
    }

    #[test]
    fn order_bound_curve() {
        let m = torus(40);
        let u = linear(&m, 0);
        let s = MapSnapshot::new(&m, &u).unwrap();
        let b = order_lower_bound(&s, 0, CurvatureClass::Npc, &[0.1, 0.2]).unwrap();
        assert_eq!(b, vec![(0.1, 1.0), (0.2, 1.0)]);
    }
}
