//! Discrete harmonic maps: Dirichlet energy, vertex relaxation by Fréchet
//! means, sweep solvers and pull-back tensor estimates.

mod pullback;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::riemannian::MeshDomain;
use crate::targets::{frechet_mean, FrechetConfig, TargetPoint, TargetSpace};

pub use pullback::{
    edge_density, energy_density, energy_density_field, local_pullback, pullback_tensor_estimate,
    EnergyDensityField, PullbackTensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Boundary vertices of the mesh keep their values.
    Dirichlet,
    /// Closed domain; every vertex is free.
    Periodic,
}

/// The discrete map `u`: one target point per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct MapState {
    pub values: Vec<TargetPoint>,
    pub space: TargetSpace,
    pub boundary_condition: BoundaryCondition,
}

#[derive(Serialize, Deserialize)]
struct VertexValue {
    vertex: usize,
    point: TargetPoint,
}

#[derive(Serialize, Deserialize)]
struct MapRecord {
    space: TargetSpace,
    boundary_condition: BoundaryCondition,
    values: Vec<VertexValue>,
}

impl MapState {
    pub fn new(space: TargetSpace, values: Vec<TargetPoint>, boundary_condition: BoundaryCondition) -> Result<Self> {
        space.validate()?;
        for p in &values {
            space.contains(p)?;
        }
        Ok(Self {
            values,
            space,
            boundary_condition,
        })
    }

    /// Evaluates `f` at every vertex.
    pub fn from_fn<F>(mesh: &MeshDomain, space: TargetSpace, bc: BoundaryCondition, f: F) -> Result<Self>
    where
        F: Fn(usize) -> TargetPoint,
    {
        Self::new(space, (0..mesh.num_vertices()).map(f).collect(), bc)
    }

    /// Dirichlet data on the boundary, Fréchet mean of all boundary values
    /// at every interior vertex.
    pub fn dirichlet_initial<F>(mesh: &MeshDomain, space: TargetSpace, boundary: F, config: &FrechetConfig) -> Result<Self>
    where
        F: Fn(usize) -> TargetPoint,
    {
        let bnd: Vec<(usize, TargetPoint)> = (0..mesh.num_vertices())
            .filter(|&v| mesh.is_boundary(v))
            .map(|v| (v, boundary(v)))
            .collect();
        if bnd.is_empty() {
            return Err(LabError::InvalidParameter("Dirichlet data on a mesh without boundary".into()));
        }
        let refs: Vec<_> = bnd.iter().map(|(_, p)| (p, 1.0)).collect();
        let mean = frechet_mean(&space, &refs, config)?;
        let mut values = vec![mean; mesh.num_vertices()];
        for (v, p) in bnd {
            values[v] = p;
        }
        Self::new(space, values, BoundaryCondition::Dirichlet)
    }

    pub fn is_fixed(&self, mesh: &MeshDomain, v: usize) -> bool {
        self.boundary_condition == BoundaryCondition::Dirichlet && mesh.is_boundary(v)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.space
            .distance(&self.values[i], &self.values[j])
            .expect("map values share one space")
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = MapRecord {
            space: self.space.clone(),
            boundary_condition: self.boundary_condition,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(vertex, p)| VertexValue {
                    vertex,
                    point: p.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: MapRecord = serde_json::from_str(s)?;
        let mut values: Vec<Option<TargetPoint>> = vec![None; rec.values.len()];
        for vv in rec.values {
            let slot = values
                .get_mut(vv.vertex)
                .ok_or_else(|| LabError::Serialization(format!("vertex {} out of range", vv.vertex)))?;
            *slot = Some(vv.point);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| LabError::Serialization(format!("vertex {i} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rec.space, values, rec.boundary_condition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    GaussSeidel,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_sweeps: usize,
    /// Threshold on `(E_prev − E)/E_prev`.
    pub energy_tol: f64,
    /// Threshold on the largest vertex displacement in a sweep.
    pub move_tol: f64,
    pub sweep_mode: SweepMode,
    /// Jacobi step fraction towards the relaxed value.
    pub damping: f64,
    pub frechet: FrechetConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 20_000,
            energy_tol: 1e-12,
            move_tol: 1e-10,
            sweep_mode: SweepMode::GaussSeidel,
            damping: 1.0,
            frechet: FrechetConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_tol > 0.0) || !(self.move_tol > 0.0) {
            return Err(LabError::InvalidParameter("solver tolerances must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if self.max_sweeps == 0 {
            return Err(LabError::InvalidParameter("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// `Σ_e w_e d²(u_i, u_j)`, which reproduces `∫|∇u|²` for affine maps.
pub fn dirichlet_energy(mesh: &MeshDomain, map: &MapState) -> f64 {
    mesh.edges()
        .iter()
        .map(|e| e.w * map.distance(e.i, e.j).powi(2))
        .sum()
}

/// Minimizer of the local energy `Σ_j w_vj d²(·, u_j)` at vertex `v`.
pub fn relax_vertex(mesh: &MeshDomain, map: &MapState, v: usize, config: &FrechetConfig) -> Result<TargetPoint> {
    let nb: Vec<(&TargetPoint, f64)> = mesh
        .neighbors(v)
        .iter()
        .map(|&(j, w)| (&map.values[j], w))
        .collect();
    if nb.is_empty() {
        return Ok(map.values[v].clone());
    }
    frechet_mean(&map.space, &nb, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub energy: f64,
    pub max_move: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub initial_energy: f64,
    pub sweeps: Vec<SweepRecord>,
}

impl ConvergenceLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,energy,max_move\n");
        s.push_str(&format!("0,{:.17e},{:.17e}\n", self.initial_energy, 0.0));
        for r in &self.sweeps {
            s.push_str(&format!("{},{:.17e},{:.17e}\n", r.sweep, r.energy, r.max_move));
        }
        s
    }

    pub fn final_energy(&self) -> f64 {
        self.sweeps.last().map_or(self.initial_energy, |r| r.energy)
    }

    /// Energy decrease of the last sweep.
    pub fn last_decrease(&self) -> f64 {
        match self.sweeps.len() {
            0 => 0.0,
            1 => self.initial_energy - self.sweeps[0].energy,
            n => self.sweeps[n - 2].energy - self.sweeps[n - 1].energy,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub map: MapState,
    pub log: ConvergenceLog,
    pub converged: bool,
}

fn gauss_seidel_sweep(mesh: &MeshDomain, map: &mut MapState, cfg: &FrechetConfig) -> Result<f64> {
    let mut max_move: f64 = 0.0;
    for v in 0..mesh.num_vertices() {
        if map.is_fixed(mesh, v) {
            continue;
        }
        let new = relax_vertex(mesh, map, v, cfg)?;
        max_move = max_move.max(map.space.distance(&map.values[v], &new)?);
        map.values[v] = new;
    }
    Ok(max_move)
}

fn jacobi_targets(mesh: &MeshDomain, map: &MapState, cfg: &FrechetConfig) -> Result<Vec<Option<TargetPoint>>> {
    (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            if map.is_fixed(mesh, v) {
                Ok(None)
            } else {
                relax_vertex(mesh, map, v, cfg).map(Some)
            }
        })
        .collect()
}

fn jacobi_step(map: &MapState, targets: &[Option<TargetPoint>], t: f64) -> Result<(MapState, f64)> {
    let mut next = map.clone();
    let mut max_move: f64 = 0.0;
    for (v, tgt) in targets.iter().enumerate() {
        if let Some(tgt) = tgt {
            let p = map.space.interpolate(&map.values[v], tgt, t)?;
            max_move = max_move.max(map.space.distance(&map.values[v], &p)?);
            next.values[v] = p;
        }
    }
    Ok((next, max_move))
}

/// Relaxes `initial` towards a discrete harmonic map.
///
/// Running out of sweeps is not an error: the outcome is returned with
/// `converged = false` and the full log.
pub fn solve_harmonic(mesh: &MeshDomain, initial: MapState, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    if initial.values.len() != mesh.num_vertices() {
        return Err(LabError::DimensionMismatch {
            expected: mesh.num_vertices(),
            found: initial.values.len(),
        });
    }
    let mut map = initial;
    let mut energy = dirichlet_energy(mesh, &map);
    let mut log = ConvergenceLog {
        initial_energy: energy,
        sweeps: Vec::new(),
    };
    for sweep in 1..=config.max_sweeps {
        let max_move = match config.sweep_mode {
            SweepMode::GaussSeidel => gauss_seidel_sweep(mesh, &mut map, &config.frechet)?,
            SweepMode::Jacobi => {
                let targets = jacobi_targets(mesh, &map, &config.frechet)?;
                let mut t = config.damping;
                loop {
                    let (next, mv) = jacobi_step(&map, &targets, t)?;
                    let e = dirichlet_energy(mesh, &next);
                    if e <= energy * (1.0 + 1e-14) || t < 1e-6 {
                        map = next;
                        break mv;
                    }
                    t *= 0.5;
                }
            }
        };
        let new_energy = dirichlet_energy(mesh, &map);
        if new_energy > energy * (1.0 + 1e-12) + 1e-300 {
            log::warn!("energy increased in sweep {sweep}: {energy:e} -> {new_energy:e}");
        }
        let decrease = (energy - new_energy) / energy.max(f64::MIN_POSITIVE);
        energy = new_energy;
        log.sweeps.push(SweepRecord {
            sweep,
            energy,
            max_move,
        });
        if decrease < config.energy_tol && max_move < config.move_tol {
            return Ok(SolveOutcome {
                map,
                log,
                converged: true,
            });
        }
    }
    Ok(SolveOutcome {
        map,
        log,
        converged: false,
    })
}
