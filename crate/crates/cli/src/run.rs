use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use npc_lab::analysis::{
    bochner_residual, bump_function, cat1_target_variation_check, cauchy_schwarz_check, conformal_bound_check,
    domain_variation_residual, eligible_vertices, energy_bound_check, fit_sigma_squared, flux_energy_check,
    lipschitz_constant_estimate, mean_value_check, order_function, order_lower_bound, radial_profiles,
    target_variation_check, totally_geodesic_check, ConformalReport, GeodesicSample, LadderFit, LipschitzEstimate,
    MapSnapshot,
};
use npc_lab::solver::{dirichlet_energy, solve_harmonic, BoundaryCondition, ConvergenceLog};
use npc_lab::targets::{check_cat1_comparison, check_npc_comparison, hyperbolic, ComparisonWitness};
use npc_lab::{
    BochnerReport, CurvatureClass, DomainTag, InequalityMargin, MapState, MeshDomain, RadialProfile, TargetPoint,
    TargetSpace,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::report::emit_report;
use crate::scenario::{BasepointSpec, CheckKind, MapData, MapMode, Scenario};

/// Relative slack for checks that hold exactly as computed.
const EXACT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub rows: usize,
    pub passed: usize,
    pub pass_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solved: bool,
    pub converged: bool,
    pub sweeps: usize,
    pub energy: f64,
    pub last_decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BochnerSummary {
    pub sigma: f64,
    pub tolerance: f64,
    pub eligible: usize,
    pub excluded: usize,
    pub required_fraction: f64,
    pub npc_pass_fraction: f64,
    /// Only for CAT(-1) targets.
    pub cat1_pass_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub basepoint: usize,
    pub quantity: String,
    #[serde(flatten)]
    pub fit: LadderFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub triangles: usize,
    pub npc_failures: usize,
    pub cat1_failures: Option<usize>,
    /// Triangles rejected because the sides were inconsistent.
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub check: String,
    pub vertex: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub domain: DomainTag,
    pub resolution: usize,
    pub vertices: usize,
    pub mesh_size: f64,
    pub target: String,
    pub solver: SolverSummary,
    pub basepoints: Vec<usize>,
    pub checks: BTreeMap<String, CheckSummary>,
    pub bochner: Option<BochnerSummary>,
    pub fits: Vec<FitRecord>,
    /// Mean fitted `σ²` coefficient over basepoints, per quantity.
    pub ladder_slopes: BTreeMap<String, f64>,
    pub conformal: Option<ConformalReport>,
    pub lipschitz: Option<LipschitzEstimate>,
    pub comparison: Option<ComparisonSummary>,
    pub skipped: Vec<Skipped>,
    pub failing: usize,
}

/// A `(σ, value)` sample of a plotted quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    pub basepoint: usize,
    pub sigma: f64,
    pub value: f64,
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub mesh: MeshDomain,
    pub map: MapState,
    pub log: ConvergenceLog,
    pub margins: Vec<InequalityMargin>,
    pub bochner: Option<BochnerReport>,
    pub series: Vec<SeriesPoint>,
    pub witnesses: Option<Vec<ComparisonWitness>>,
    pub summary: Summary,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub name: String,
    pub converged: bool,
    pub energy: f64,
    pub wall_time: Duration,
    /// Files written, in emission order.
    pub manifest: Vec<PathBuf>,
    pub pass_fractions: BTreeMap<String, f64>,
    pub failing: usize,
    pub summary: Summary,
}

impl RunResult {
    /// 3 when the solver did not converge, 2 with failing margins, else 0.
    pub fn exit_code(&self) -> i32 {
        if !self.converged {
            3
        } else if self.failing > 0 {
            2
        } else {
            0
        }
    }
}

/// Builds, solves, checks and writes the reports into `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<RunResult, CliError> {
    let start = Instant::now();
    let report = compute_report(scenario)?;
    let manifest = emit_report(&report, out)?;
    let s = &report.summary;
    let mut pass_fractions: BTreeMap<String, f64> =
        s.checks.iter().map(|(k, c)| (k.clone(), c.pass_fraction)).collect();
    if let Some(b) = &s.bochner {
        pass_fractions.insert("bochner_npc".into(), b.npc_pass_fraction);
        if let Some(f) = b.cat1_pass_fraction {
            pass_fractions.insert("bochner_cat1".into(), f);
        }
    }
    Ok(RunResult {
        name: scenario.name.clone(),
        converged: s.solver.converged,
        energy: s.solver.energy,
        wall_time: start.elapsed(),
        manifest,
        pass_fractions,
        failing: s.failing,
        summary: report.summary.clone(),
    })
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn data_value(data: &MapData, mesh: &MeshDomain, space: &TargetSpace, v: usize) -> TargetPoint {
    let p = mesh.vertex(v).xyz;
    match data {
        MapData::Affine { offset, matrix } => TargetPoint::Euclidean(
            offset
                .iter()
                .zip(matrix)
                .map(|(o, row)| o + row[0] * p[0] + row[1] * p[1])
                .collect(),
        ),
        MapData::TreeArcs { amplitude } => {
            let rays = match space {
                TargetSpace::Tree(t) => t.edges().len(),
                _ => unreachable!("validated"),
            };
            // perimeter parameter in [0, 4), counter-clockwise from the origin
            let (x, y) = (p[0], p[1]);
            let t = if y <= 1e-12 {
                x
            } else if x >= 1.0 - 1e-12 {
                1.0 + y
            } else if y >= 1.0 - 1e-12 {
                3.0 - x
            } else {
                4.0 - y
            };
            let a = rays as f64 * t / 4.0;
            let e = (a.floor() as usize).min(rays - 1);
            let s = a - e as f64;
            TargetPoint::Tree {
                edge: e,
                offset: amplitude * (std::f64::consts::PI * s).sin(),
            }
        }
        MapData::Identity => TargetPoint::Hyperbolic(hyperbolic::from_poincare([p[0], p[1]])),
    }
}

fn build_map(scenario: &Scenario, mesh: &MeshDomain) -> Result<(MapState, ConvergenceLog, bool, bool), CliError> {
    let space = scenario.target.clone();
    let f = |v: usize| data_value(&scenario.map.data, mesh, &space, v);
    match scenario.map.mode {
        MapMode::Dirichlet => {
            let init = MapState::dirichlet_initial(mesh, space.clone(), f, &scenario.solver.frechet)?;
            let out = solve_harmonic(mesh, init, &scenario.solver)?;
            if !out.converged {
                log::warn!("solver stopped after {} sweeps without converging", out.log.sweeps.len());
            }
            Ok((out.map, out.log, out.converged, true))
        }
        MapMode::Prescribed => {
            let bc = if scenario.domain.has_boundary() {
                BoundaryCondition::Dirichlet
            } else {
                BoundaryCondition::Periodic
            };
            let map = MapState::from_fn(mesh, space.clone(), bc, f)?;
            let log = ConvergenceLog {
                initial_energy: dirichlet_energy(mesh, &map),
                sweeps: Vec::new(),
            };
            Ok((map, log, true, false))
        }
    }
}

fn resolve_basepoints(scenario: &Scenario, snapshot: &MapSnapshot) -> Vec<usize> {
    let mesh = snapshot.mesh;
    match &scenario.analysis.basepoints {
        BasepointSpec::Points { points } => points
            .iter()
            .map(|p| {
                let q = [p[0], p[1], p.get(2).copied().unwrap_or(0.0)];
                (0..mesh.num_vertices())
                    .min_by(|&a, &b| {
                        let tag = mesh.tag();
                        tag.distance(&q, &mesh.vertex(a).xyz)
                            .total_cmp(&tag.distance(&q, &mesh.vertex(b).xyz))
                    })
                    .expect("mesh has vertices")
            })
            .collect(),
        BasepointSpec::Random { count } => {
            let largest = scenario.analysis.sigmas.last().copied().unwrap_or(0.0);
            let (candidates, _) = eligible_vertices(snapshot, largest);
            if candidates.len() < *count {
                log::warn!("only {} vertices can host basepoints, {count} requested", candidates.len());
            }
            let mut r = rng(scenario.seed, 1);
            let mut out: Vec<usize> = sample(&mut r, candidates.len(), (*count).min(candidates.len()))
                .into_iter()
                .map(|i| candidates[i])
                .collect();
            out.sort_unstable();
            out
        }
    }
}

#[derive(Default)]
struct BasepointOutcome {
    margins: BTreeMap<CheckKind, Vec<InequalityMargin>>,
    series: Vec<SeriesPoint>,
    fits: Vec<FitRecord>,
    skipped: Vec<Skipped>,
}

impl BasepointOutcome {
    fn skip(&mut self, check: CheckKind, v: usize, reason: impl ToString) {
        self.skipped.push(Skipped {
            check: check.name().into(),
            vertex: Some(v),
            reason: reason.to_string(),
        });
    }

    fn record(&mut self, check: CheckKind, v: usize, r: npc_lab::Result<Vec<InequalityMargin>>) {
        match r {
            Ok(m) => self.margins.entry(check).or_default().extend(m),
            Err(e) => self.skip(check, v, e),
        }
    }

    fn fit(&mut self, v: usize, quantity: &str, samples: &[(f64, f64)]) {
        if samples.len() < 2 {
            return;
        }
        let (s, y): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        if let Ok(fit) = fit_sigma_squared(&s, &y) {
            self.fits.push(FitRecord {
                basepoint: v,
                quantity: quantity.into(),
                fit,
            });
        }
    }
}

fn push_series(out: &mut BasepointOutcome, name: &str, v: usize, sigmas: &[f64], values: &[f64]) {
    out.series.extend(sigmas.iter().zip(values).map(|(&sigma, &value)| SeriesPoint {
        series: name.into(),
        basepoint: v,
        sigma,
        value,
    }));
}

fn radial_checks(
    scenario: &Scenario,
    snapshot: &MapSnapshot,
    v: usize,
    checks: &[CheckKind],
    class: CurvatureClass,
) -> BasepointOutcome {
    let a = &scenario.analysis;
    let mut out = BasepointOutcome::default();
    let profile: RadialProfile = match radial_profiles(snapshot, v, &a.sigmas) {
        Ok(p) if !p.is_empty() => p,
        Ok(_) => {
            for &c in checks {
                out.skip(c, v, "no resolved radius");
            }
            return out;
        }
        Err(e) => {
            for &c in checks {
                out.skip(c, v, &e);
            }
            return out;
        }
    };
    for (name, samples) in profile.series() {
        let (s, y): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        push_series(&mut out, name, v, &s, &y);
    }
    let order: Vec<(f64, f64)> = order_function(&profile)
        .into_iter()
        .filter_map(|(s, o)| o.map(|o| (s, o)))
        .collect();
    let (os, oy): (Vec<f64>, Vec<f64>) = order.iter().copied().unzip();
    push_series(&mut out, "order", v, &os, &oy);
    out.fit(v, "order", &order);
    let flux_ratio: Vec<(f64, f64)> = (0..profile.len())
        .filter(|&k| profile.energy[k] > 0.0)
        .map(|k| (profile.sigmas[k], profile.sigmas[k] * profile.flux[k] / profile.energy[k]))
        .collect();
    out.fit(v, "flux_ratio", &flux_ratio);
    let averages: Vec<(f64, f64)> = (0..profile.len())
        .map(|k| (profile.sigmas[k], profile.energy[k] / profile.volume[k]))
        .collect();
    out.fit(v, "mean_value", &averages);

    for &check in checks {
        match check {
            CheckKind::Order => {
                let r = order_lower_bound(snapshot, v, class, &os).map(|bound| {
                    order
                        .iter()
                        .zip(bound)
                        .map(|(&(s, o), (_, b))| InequalityMargin::new("order", v, Some(s), o, b, a.rel_tolerance * b.abs()))
                        .collect()
                });
                out.record(check, v, r);
            }
            CheckKind::EnergyBound => {
                let r = energy_bound_check(snapshot, &profile, class, a.rel_tolerance);
                out.record(check, v, r);
            }
            CheckKind::FluxEnergy => {
                let r = flux_energy_check(snapshot, &profile, class, a.rel_tolerance);
                out.record(check, v, r);
            }
            CheckKind::MeanValue => {
                let r = mean_value_check(snapshot, v, &profile.sigmas, class, a.tolerance);
                out.record(check, v, r);
            }
            CheckKind::CauchySchwarz => {
                out.record(check, v, Ok(cauchy_schwarz_check(&profile, EXACT_REL_TOL)));
            }
            CheckKind::DomainVariation => {
                let r = profile
                    .sigmas
                    .iter()
                    .map(|&s| domain_variation_residual(snapshot, v, s, a.rel_tolerance))
                    .collect();
                out.record(check, v, r);
            }
            _ => {}
        }
    }
    for margins in out.margins.values() {
        for m in margins {
            if let Some(s) = m.sigma {
                out.series.push(SeriesPoint {
                    series: format!("margin:{}", m.check),
                    basepoint: v,
                    sigma: s,
                    value: m.margin,
                });
            }
        }
    }
    out
}

fn target_variation(
    scenario: &Scenario,
    snapshot: &MapSnapshot,
    skipped: &mut Vec<Skipped>,
) -> Vec<InequalityMargin> {
    let Some(spec) = scenario.analysis.bumps else {
        skipped.push(Skipped {
            check: CheckKind::TargetVariation.name().into(),
            vertex: None,
            reason: "no bump configuration".into(),
        });
        return Vec::new();
    };
    let mesh = snapshot.mesh;
    let h = mesh.mesh_size();
    let candidates: Vec<usize> = (0..mesh.num_vertices())
        .filter(|&v| !snapshot.map.is_fixed(mesh, v) && mesh.clearance(v) >= spec.radius + h)
        .collect();
    let mut r = rng(scenario.seed, 2);
    let mut centers: Vec<usize> = sample(&mut r, candidates.len(), spec.count.min(candidates.len()))
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    centers.sort_unstable();
    let cat1 = matches!(snapshot.map.space, TargetSpace::HyperbolicPlane);
    let results: Vec<Result<Vec<InequalityMargin>, (usize, String)>> = centers
        .par_iter()
        .map(|&c| {
            let bump = bump_function(mesh, c, spec.radius).map_err(|e| (c, e.to_string()))?;
            let q = snapshot.map.values[c].clone();
            let mut m = vec![target_variation_check(snapshot, &q, &bump, spec.tolerance).map_err(|e| (c, e.to_string()))?];
            if cat1 {
                m.push(cat1_target_variation_check(snapshot, &q, &bump, spec.tolerance).map_err(|e| (c, e.to_string()))?);
            }
            Ok(m)
        })
        .collect();
    let mut npc = Vec::new();
    let mut strong = Vec::new();
    for r in results {
        match r {
            Ok(mut m) => {
                if m.len() == 2 {
                    strong.push(m.pop().unwrap());
                }
                npc.push(m.pop().unwrap());
            }
            Err((c, reason)) => skipped.push(Skipped {
                check: CheckKind::TargetVariation.name().into(),
                vertex: Some(c),
                reason,
            }),
        }
    }
    npc.extend(strong);
    npc
}

fn comparison_fuzz(
    space: &TargetSpace,
    count: usize,
    seed: u64,
) -> (Vec<InequalityMargin>, Vec<ComparisonWitness>, ComparisonSummary) {
    let mut r = rng(seed, 3);
    let cat1 = space.curvature_class() == CurvatureClass::CatMinus1;
    let scale = if cat1 { 2.0 } else { 1.0 };
    let mut witnesses = Vec::new();
    let mut summary = ComparisonSummary {
        triangles: count,
        npc_failures: 0,
        cat1_failures: cat1.then_some(0),
        rejected: 0,
    };
    // worst (comparison distance, actual distance) per model
    let mut worst = [(f64::INFINITY, 0.0, 0.0f64); 2];
    for _ in 0..count {
        let a = space.random_point(&mut r, scale);
        let b = space.random_point(&mut r, scale);
        let c = space.random_point(&mut r, scale);
        let t = r.gen_range(0.0..=1.0);
        let mut models: Vec<(usize, npc_lab::Result<npc_lab::targets::ComparisonResult>)> =
            vec![(0, check_npc_comparison(space, &a, &b, &c, t))];
        if cat1 {
            models.push((1, check_cat1_comparison(space, &a, &b, &c, t)));
        }
        for (k, res) in models {
            let Ok(res) = res else {
                summary.rejected += 1;
                continue;
            };
            if res.rhs - res.lhs < worst[k].0 - worst[k].1 || worst[k].0.is_infinite() {
                worst[k] = (res.rhs, res.lhs, 1e-9 * (1.0 + res.rhs));
            }
            if !res.pass {
                if k == 0 {
                    summary.npc_failures += 1;
                } else if let Some(f) = summary.cat1_failures.as_mut() {
                    *f += 1;
                }
                witnesses.push(ComparisonWitness {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    t,
                    lhs: res.lhs,
                    rhs: res.rhs,
                });
            }
        }
    }
    let names = ["npc_comparison", "cat1_comparison"];
    let margins = worst
        .iter()
        .enumerate()
        .filter(|(_, w)| w.0.is_finite())
        .map(|(k, &(cmp, actual, tol))| InequalityMargin::new(names[k], 0, None, cmp, actual, tol))
        .collect();
    (margins, witnesses, summary)
}

/// Runs the whole pipeline in memory.
pub fn compute_report(scenario: &Scenario) -> Result<RunReport, CliError> {
    let issues = scenario.validate();
    if !issues.is_empty() {
        return Err(CliError::Config(issues));
    }
    let a = &scenario.analysis;
    let mesh = scenario.build_mesh()?;
    let (map, log, converged, solved) = build_map(scenario, &mesh)?;
    let snapshot = MapSnapshot::new(&mesh, &map)?;
    let class = map.space.curvature_class();
    let checks = scenario.enabled_checks();
    let mut skipped = Vec::new();
    for c in &checks {
        if !c.applies_to(&scenario.domain.tag, &scenario.target) {
            skipped.push(Skipped {
                check: c.name().into(),
                vertex: None,
                reason: format!("does not apply to {:?} with target {}", scenario.domain.tag, scenario.target.label()),
            });
        }
    }
    let has = |c: CheckKind| checks.contains(&c) && c.applies_to(&scenario.domain.tag, &scenario.target);

    let basepoints = resolve_basepoints(scenario, &snapshot);
    let radial: Vec<CheckKind> = checks.iter().copied().filter(|c| c.is_radial()).collect();
    let outcomes: Vec<BasepointOutcome> = if radial.is_empty() {
        Vec::new()
    } else {
        basepoints
            .par_iter()
            .map(|&v| radial_checks(scenario, &snapshot, v, &radial, class))
            .collect()
    };

    let mut margins = Vec::new();
    for &c in &radial {
        for o in &outcomes {
            if let Some(m) = o.margins.get(&c) {
                margins.extend(m.iter().cloned());
            }
        }
    }
    let mut series = Vec::new();
    let mut fits = Vec::new();
    for o in outcomes {
        series.extend(o.series);
        fits.extend(o.fits);
        skipped.extend(o.skipped);
    }

    if has(CheckKind::TargetVariation) {
        margins.extend(target_variation(scenario, &snapshot, &mut skipped));
    }

    let mut bochner = None;
    let mut bochner_summary = None;
    if has(CheckKind::Bochner) {
        let sigma = a.bochner_sigma();
        let report = bochner_residual(&snapshot, sigma, a.tolerance)?;
        bochner_summary = Some(BochnerSummary {
            sigma,
            tolerance: a.tolerance,
            eligible: report.rows.len(),
            excluded: report.excluded,
            required_fraction: a.bochner_fraction,
            npc_pass_fraction: report.npc_pass_fraction(),
            cat1_pass_fraction: (class == CurvatureClass::CatMinus1).then(|| report.cat1_pass_fraction()),
        });
        bochner = Some(report);
    }

    let mut conformal = None;
    if has(CheckKind::Conformal) {
        match conformal_bound_check(&snapshot, a.anisotropy_tol, a.tolerance) {
            Ok((report, m)) => {
                if m.is_none() {
                    skipped.push(Skipped {
                        check: "conformal".into(),
                        vertex: None,
                        reason: format!("map is not conformal (anisotropy {:.3e})", report.max_anisotropy),
                    });
                }
                margins.extend(m);
                conformal = Some(report);
            }
            Err(e) => skipped.push(Skipped {
                check: "conformal".into(),
                vertex: None,
                reason: e.to_string(),
            }),
        }
    }

    if has(CheckKind::TotallyGeodesic) {
        let result = a
            .geodesics
            .ok_or_else(|| npc_lab::LabError::InvalidParameter("no geodesic configuration".into()))
            .and_then(|g| {
                let samples = GeodesicSample::random(&mesh.tag(), g.count, scenario.seed ^ 0x6e0d)?;
                totally_geodesic_check(&snapshot, &samples, g.tolerance)
            });
        match result {
            Ok(m) => margins.push(m),
            Err(e) => skipped.push(Skipped {
                check: "totally_geodesic".into(),
                vertex: None,
                reason: e.to_string(),
            }),
        }
    }

    let mut lipschitz = None;
    if has(CheckKind::Lipschitz) {
        let result = a
            .lipschitz_depth
            .ok_or_else(|| npc_lab::LabError::InvalidParameter("no lipschitz depth".into()))
            .and_then(|d| lipschitz_constant_estimate(&snapshot, d));
        match result {
            Ok(l) => lipschitz = Some(l),
            Err(e) => skipped.push(Skipped {
                check: "lipschitz".into(),
                vertex: None,
                reason: e.to_string(),
            }),
        }
    }

    let mut witnesses = None;
    let mut comparison = None;
    if has(CheckKind::Comparison) {
        let (m, w, s) = comparison_fuzz(&map.space, a.triangles, scenario.seed);
        margins.extend(m);
        witnesses = Some(w);
        comparison = Some(s);
    }

    let mut check_summaries: BTreeMap<String, CheckSummary> = BTreeMap::new();
    for m in &margins {
        let e = check_summaries.entry(m.check.clone()).or_insert(CheckSummary {
            rows: 0,
            passed: 0,
            pass_fraction: 0.0,
        });
        e.rows += 1;
        e.passed += m.pass as usize;
    }
    for c in check_summaries.values_mut() {
        c.pass_fraction = c.passed as f64 / c.rows as f64;
    }
    let mut failing = margins.iter().filter(|m| !m.pass).count();
    if let Some(b) = &bochner_summary {
        failing += (b.npc_pass_fraction < b.required_fraction) as usize;
        failing += b.cat1_pass_fraction.is_some_and(|f| f < b.required_fraction) as usize;
    }

    let mut slopes: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for f in &fits {
        let e = slopes.entry(f.quantity.clone()).or_insert((0.0, 0));
        e.0 += f.fit.slope;
        e.1 += 1;
    }

    let summary = Summary {
        name: scenario.name.clone(),
        seed: scenario.seed,
        domain: scenario.domain.tag,
        resolution: scenario.domain.resolution,
        vertices: mesh.num_vertices(),
        mesh_size: mesh.mesh_size(),
        target: scenario.target.label(),
        solver: SolverSummary {
            solved,
            converged,
            sweeps: log.sweeps.len(),
            energy: log.final_energy(),
            last_decrease: log.last_decrease(),
        },
        basepoints,
        checks: check_summaries,
        bochner: bochner_summary,
        fits,
        ladder_slopes: slopes.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
        conformal,
        lipschitz,
        comparison,
        skipped,
        failing,
    };
    drop(snapshot);
    Ok(RunReport {
        mesh,
        map,
        log,
        margins,
        bochner,
        series,
        witnesses,
        summary,
    })
}
