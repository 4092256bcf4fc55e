use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InequalityMargin, MapSnapshot};
use crate::error::{LabError, Result};
use crate::riemannian::DomainTag;
use crate::solver::dirichlet_energy;
use crate::targets::{CurvatureClass, TargetPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub vertices: usize,
    /// `λ = tr π / n`.
    pub max_lambda: f64,
    pub min_lambda: f64,
    /// Largest `(λ_max − λ_min)/(λ_max + λ_min)` over eigenvalues of `π`.
    pub max_anisotropy: f64,
    pub conformal: bool,
}

/// `λ ≤ 1/(n−1)` for conformal maps from hyperbolic domains into CAT(-1)
/// targets. Returns no margin when the map is not conformal within
/// `anisotropy_tol`.
pub fn conformal_bound_check(
    snapshot: &MapSnapshot,
    anisotropy_tol: f64,
    tol: f64,
) -> Result<(ConformalReport, Option<InequalityMargin>)> {
    let mesh = snapshot.mesh;
    if !matches!(mesh.tag(), DomainTag::HyperbolicPatch { .. }) {
        return Err(LabError::InvalidParameter("conformal bound needs a hyperbolic domain".into()));
    }
    if snapshot.map.space.curvature_class() != CurvatureClass::CatMinus1 {
        return Err(LabError::SpaceMismatch("conformal bound needs a CAT(-1) target".into()));
    }
    let n = snapshot.dimension() as f64;
    let mut report = ConformalReport {
        vertices: 0,
        max_lambda: f64::NEG_INFINITY,
        min_lambda: f64::INFINITY,
        max_anisotropy: 0.0,
        conformal: true,
    };
    let mut worst = 0;
    for v in mesh.interior_vertices() {
        let Some(t) = &snapshot.tensors[v] else { continue };
        let eig = SymmetricEigen::new(t.matrix.clone()).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        let aniso = if hi + lo > 1e-12 { (hi - lo) / (hi + lo) } else { 0.0 };
        let lambda = t.trace() / n;
        report.vertices += 1;
        report.max_anisotropy = report.max_anisotropy.max(aniso);
        report.min_lambda = report.min_lambda.min(lambda);
        if lambda > report.max_lambda {
            report.max_lambda = lambda;
            worst = v;
        }
    }
    if report.vertices == 0 {
        return Err(LabError::Undefined("no interior vertex with a pull-back tensor".into()));
    }
    report.conformal = report.max_anisotropy <= anisotropy_tol;
    if !report.conformal {
        log::warn!(
            "map is not conformal (anisotropy {:.3e} > {anisotropy_tol:e}); skipping the bound",
            report.max_anisotropy
        );
        return Ok((report, None));
    }
    let bound = 1.0 / (n - 1.0);
    let margin = InequalityMargin::new("conformal_bound", worst, None, bound, report.max_lambda, tol);
    Ok((report, Some(margin)))
}

/// A straight segment in the flat chart of a torus or square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl GeodesicSample {
    /// Segments inside the fundamental domain `[0, l1) × [0, l2)` with
    /// lengths between 10% and 45% of the shorter side.
    pub fn random(tag: &DomainTag, count: usize, seed: u64) -> Result<Vec<Self>> {
        let (l1, l2) = match *tag {
            DomainTag::FlatTorus { l1, l2 } => (l1, l2),
            DomainTag::FlatSquare => (1.0, 1.0),
            _ => return Err(LabError::InvalidParameter("geodesic samples need a flat domain".into())),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lmin = l1.min(l2);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let start = [rng.gen_range(0.0..l1), rng.gen_range(0.0..l2)];
            let len = rng.gen_range(0.1..0.45) * lmin;
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let end = [start[0] + len * th.cos(), start[1] + len * th.sin()];
            if (0.0..l1).contains(&end[0]) && (0.0..l2).contains(&end[1]) {
                out.push(Self { start, end });
            }
        }
        Ok(out)
    }
}

/// Value of `u` at a chart point that is a vertex or an edge midpoint.
fn value_at_midpoint(snapshot: &MapSnapshot, p: [f64; 2], near: usize) -> Result<TargetPoint> {
    let mesh = snapshot.mesh;
    let tol = 1e-9 * mesh.mesh_size();
    let pos = |v: usize| [mesh.vertex(v).xyz[0], mesh.vertex(v).xyz[1]];
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    if dist(pos(near), p) < tol {
        return Ok(snapshot.map.values[near].clone());
    }
    for &a in std::iter::once(&near).chain(mesh.ring(near)) {
        for &b in mesh.ring(a) {
            let (pa, pb) = (pos(a), pos(b));
            if dist([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0], p) < tol {
                return snapshot
                    .map
                    .space
                    .interpolate(&snapshot.map.values[a], &snapshot.map.values[b], 0.5);
            }
        }
    }
    log::warn!("midpoint {p:?} is not on the mesh skeleton; using vertex {near}");
    Ok(snapshot.map.values[near].clone())
}

/// Largest relative midpoint defect
/// `max(|d₀₁ − 2d₀ₘ|, |d₀₁ − 2dₘ₁|)/d₀₁` over the samples, with endpoints
/// snapped to vertices.
pub fn totally_geodesic_check(
    snapshot: &MapSnapshot,
    samples: &[GeodesicSample],
    tol: f64,
) -> Result<InequalityMargin> {
    let mesh = snapshot.mesh;
    let space = &snapshot.map.space;
    let mut worst = (0.0f64, 0usize);
    for g in samples {
        let a = mesh.nearest_flat_vertex(g.start[0], g.start[1])?;
        let b = mesh.nearest_flat_vertex(g.end[0], g.end[1])?;
        if a == b {
            continue;
        }
        let pa = mesh.vertex(a).xyz;
        let pb = mesh.vertex(b).xyz;
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let near = mesh.nearest_flat_vertex(mid[0], mid[1])?;
        let um = value_at_midpoint(snapshot, mid, near)?;
        let (ua, ub) = (&snapshot.map.values[a], &snapshot.map.values[b]);
        let d01 = space.distance(ua, ub)?;
        if d01 == 0.0 {
            continue;
        }
        let d0m = space.distance(ua, &um)?;
        let dm1 = space.distance(&um, ub)?;
        let defect = (d01 - 2.0 * d0m).abs().max((d01 - 2.0 * dm1).abs()) / d01;
        if defect > worst.0 {
            worst = (defect, a);
        }
    }
    Ok(InequalityMargin::new("totally_geodesic", worst.1, None, 0.0, worst.0, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub depth: f64,
    /// `max d(u_i, u_j)/ℓ_e` over edges with both ends at depth `≥ depth`.
    pub constant: f64,
    pub energy: f64,
    /// `√E / depth^{n/2}`, the scaling of the interior bound.
    pub comparison: f64,
}

pub fn lipschitz_constant_estimate(snapshot: &MapSnapshot, depth: f64) -> Result<LipschitzEstimate> {
    let mesh = snapshot.mesh;
    if !(depth > 0.0) {
        return Err(LabError::InvalidParameter(format!("depth must be positive, got {depth}")));
    }
    let deep = |v: usize| mesh.clearance(v) >= depth;
    let mut constant: Option<f64> = None;
    for e in mesh.edges() {
        if deep(e.i) && deep(e.j) {
            let r = snapshot.map.distance(e.i, e.j) / e.len;
            constant = Some(constant.map_or(r, |c: f64| c.max(r)));
        }
    }
    let constant = constant.ok_or_else(|| LabError::Undefined(format!("no edges at depth {depth}")))?;
    let energy = dirichlet_energy(mesh, snapshot.map);
    Ok(LipschitzEstimate {
        depth,
        constant,
        energy,
        comparison: energy.sqrt() / depth.powf(mesh.dimension() as f64 / 2.0),
    })
}
