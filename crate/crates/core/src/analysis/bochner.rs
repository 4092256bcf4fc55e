use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eligible_vertices, weak_laplacian, MapSnapshot};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BochnerRow {
    pub vertex: usize,
    /// `|∇u|²`.
    pub density: f64,
    pub ric_pi: f64,
    pub pi_pi: f64,
    /// `|∇u|⁴`.
    pub density_sq: f64,
    /// `½Δ|∇u|²`.
    pub half_laplacian: f64,
    /// `½Δ|∇u|² − Ric:π`.
    pub residual_npc: f64,
    /// `½Δ|∇u|² − Ric:π − |∇u|⁴ + π:π`.
    pub residual_cat1: f64,
    /// Distance to the domain boundary (infinite on closed domains).
    pub clearance: f64,
}

/// Pointwise weak Bochner inequality at every eligible vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BochnerReport {
    pub sigma: f64,
    pub tolerance: f64,
    pub rows: Vec<BochnerRow>,
    /// Vertices failing the eligibility preconditions.
    pub excluded: usize,
}

impl BochnerReport {
    fn fraction(&self, f: impl Fn(&BochnerRow) -> bool) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| f(r)).count() as f64 / self.rows.len() as f64
    }

    pub fn npc_pass_fraction(&self) -> f64 {
        self.fraction(|r| r.residual_npc >= -self.tolerance)
    }

    pub fn cat1_pass_fraction(&self) -> f64 {
        self.fraction(|r| r.residual_cat1 >= -self.tolerance)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("vertex,density,ric_pi,pi_pi,lap,residual_npc,residual_cat1\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.vertex, r.density, r.ric_pi, r.pi_pi, r.half_laplacian, r.residual_npc, r.residual_cat1
            ));
        }
        s
    }
}

/// Evaluates both residuals with the ball-average Laplacian at radius
/// `sigma`. Rows are in vertex order.
pub fn bochner_residual(snapshot: &MapSnapshot, sigma: f64, tolerance: f64) -> Result<BochnerReport> {
    let (vertices, mut excluded) = eligible_vertices(snapshot, sigma);
    let rows: Vec<Option<BochnerRow>> = vertices
        .par_iter()
        .map(|&v| {
            let lap = weak_laplacian(snapshot.mesh, &snapshot.density, v, sigma).ok()?;
            let (ric_pi, pi_pi, density_sq) = snapshot.contractions(v).ok()?;
            let half = 0.5 * lap;
            Some(BochnerRow {
                vertex: v,
                density: snapshot.density[v],
                ric_pi,
                pi_pi,
                density_sq,
                half_laplacian: half,
                residual_npc: half - ric_pi,
                residual_cat1: half - ric_pi - density_sq + pi_pi,
                clearance: snapshot.mesh.clearance(v),
            })
        })
        .collect();
    excluded += rows.iter().filter(|r| r.is_none()).count();
    Ok(BochnerReport {
        sigma,
        tolerance,
        rows: rows.into_iter().flatten().collect(),
        excluded,
    })
}
