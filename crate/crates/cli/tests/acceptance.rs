//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use npc_lab::analysis::MapSnapshot;
use npc_lab::riemannian::quadrature::quadrature_selftest;
use npc_lab::riemannian::{bishop_gromov_profile, ExactModel, NormalChart};
use npc_lab::targets::{check_cat1_comparison, check_npc_comparison, ComparisonWitness, MetricTree, TreeEdge};
use npc_lab::{MapState, MeshDomain, TargetPoint, TargetSpace};
use npc_lab_cli::scenario::BasepointSpec;
use npc_lab_cli::{compute_report, parse_scenario, run_scenario, CheckKind, RunResult, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUADRATURE_REL_TOL: f64 = 1e-6;
const EXPANSION_RADIUS: f64 = 0.3;
const BISHOP_GROMOV_CONSTANT: f64 = 1.0 / 360.0;
const BISHOP_GROMOV_SLACK: f64 = 0.3;
const AFFINE_TOL: f64 = 1e-8;
const ORDER_TOL: f64 = 0.05;
const ORDER_LADDER: [usize; 3] = [40, 80, 160];
const SWEEP_DECREASE: f64 = 1e-10;
const BUMP_COUNT: usize = 50;
const BOCHNER_FRACTION: f64 = 0.95;
const PULLBACK_TOL: f64 = 0.05;
const LAMBDA_TOL: f64 = 0.05;
const CAT1_RESIDUAL_TOL: f64 = 0.1;
const GEODESIC_SAMPLES: usize = 100;
const TRIANGLES: usize = 10_000;

const BUNDLED: [&str; 5] = ["flat-linear", "square-affine", "square-tripod", "hyperbolic-identity", "torus-affine"];

type Outcome = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

struct Runs {
    root: tempfile::TempDir,
    results: BTreeMap<&'static str, RunResult>,
}

impl Runs {
    fn dir(&self, name: &str) -> PathBuf {
        self.root.path().join("a").join(name)
    }

    fn read(&self, name: &str, file: &str) -> String {
        std::fs::read_to_string(self.dir(name).join(file)).unwrap_or_else(|e| panic!("{name}/{file}: {e}"))
    }

    fn load(&self, name: &str) -> (MeshDomain, MapState) {
        let mesh = MeshDomain::from_json(&self.read(name, "mesh.json")).expect("mesh json");
        let map = MapState::from_json(&self.read(name, "map.json")).expect("map json");
        (mesh, map)
    }
}

fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = {:?}", row[key]))
}

fn quadrature() -> Outcome {
    let rows = quadrature_selftest(20_240_917, 100, &[2, 3], &[0.5, 1.0, 2.0]).map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let detail = format!("{} comparisons, worst relative error {worst:.2e}", rows.len());
    if rows.len() == 100 * 2 * 3 * 3 && worst <= QUADRATURE_REL_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn expansion_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (model, exact) in [
        (ExactModel::RoundSphere { radius: 1.0 }, (|t: f64| t.sin() / t) as fn(f64) -> f64),
        (ExactModel::Hyperbolic { radius: 1.0 }, |t: f64| t.sinh() / t),
    ] {
        let chart = NormalChart::from_model(2, model, 1.0).map_err(|e| e.to_string())?;
        for i in 1..=30 {
            for j in 0..12 {
                let t = EXPANSION_RADIUS * i as f64 / 30.0;
                let th = 2.0 * PI * j as f64 / 12.0;
                let x = [t * th.cos(), t * th.sin()];
                let d = chart.evaluate_volume_density(&x).map_err(|e| e.to_string())?;
                let bound = t.powi(4) / 100.0;
                let err = (d.expansion - exact(t)).abs();
                if err > bound {
                    return Err(format!("{model:?}: |x| = {t}, error {err:.3e} > {bound:.3e}"));
                }
                worst = worst.max(err / bound);
            }
        }
    }
    Ok(format!("worst error is {:.1}% of |x|⁴/100", 100.0 * worst))
}

fn bishop_gromov() -> Outcome {
    let chart = NormalChart::from_model(2, ExactModel::RoundSphere { radius: 1.0 }, 3.0).map_err(|e| e.to_string())?;
    let sigmas: Vec<f64> = (0..=25).map(|k| 0.05 + 0.01 * k as f64).collect();
    let samples = bishop_gromov_profile(&chart, &sigmas).map_err(|e| e.to_string())?;
    let (mut num_, mut den) = (0.0, 0.0);
    for s in &samples {
        // independent oracle: |∂B|/|B| = cot(σ/2) on the unit sphere
        let oracle = 1.0 / (s.sigma / 2.0).tan();
        let measured = s.measured.ok_or("no measured ratio")?;
        if (measured - oracle).abs() > 1e-10 * oracle {
            return Err(format!("σ = {}: ratio {measured} vs cot(σ/2) = {oracle}", s.sigma));
        }
        let residual = (oracle - (2.0 / s.sigma - s.sigma / 6.0)).abs();
        num_ += residual * s.sigma.powi(3);
        den += s.sigma.powi(6);
    }
    let fitted = num_ / den;
    let rel = fitted / BISHOP_GROMOV_CONSTANT - 1.0;
    let detail = format!("fitted σ³ coefficient {fitted:.6e} ({:+.2}% from 1/360)", 100.0 * rel);
    if rel.abs() <= BISHOP_GROMOV_SLACK {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Solves the graph-Laplacian Dirichlet problem directly, one component at
/// a time.
fn graph_laplacian_solution(mesh: &MeshDomain, boundary: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nv = mesh.num_vertices();
    let interior: Vec<usize> = (0..nv).filter(|&v| !mesh.is_boundary(v)).collect();
    let mut index = vec![usize::MAX; nv];
    for (k, &v) in interior.iter().enumerate() {
        index[v] = k;
    }
    let m = interior.len();
    let dim = boundary[0].len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DMatrix::<f64>::zeros(m, dim);
    for e in mesh.edges() {
        for (p, q) in [(e.i, e.j), (e.j, e.i)] {
            if index[p] == usize::MAX {
                continue;
            }
            a[(index[p], index[p])] += e.w;
            if index[q] == usize::MAX {
                for c in 0..dim {
                    b[(index[p], c)] += e.w * boundary[q][c];
                }
            } else {
                a[(index[p], index[q])] -= e.w;
            }
        }
    }
    let x = a.lu().solve(&b).expect("graph Laplacian is nonsingular");
    let mut out = boundary.to_vec();
    for (k, &v) in interior.iter().enumerate() {
        out[v] = (0..dim).map(|c| x[(k, c)]).collect();
    }
    out
}

fn euclidean(p: &TargetPoint) -> Vec<f64> {
    match p {
        TargetPoint::Euclidean(x) => x.clone(),
        other => panic!("not euclidean: {other:?}"),
    }
}

fn euclidean_solver_oracle(runs: &Runs) -> Outcome {
    let r = &runs.results["square-affine"];
    if !r.converged {
        return Err("solver did not converge".into());
    }
    let (mesh, map) = runs.load("square-affine");
    let affine = |v: usize| {
        let p = mesh.vertex(v).xyz;
        vec![0.3 + 2.0 * p[0] + p[1], -0.2 + 0.5 * p[0] - p[1]]
    };
    let values: Vec<Vec<f64>> = map.values.iter().map(euclidean).collect();
    let boundary: Vec<Vec<f64>> = (0..mesh.num_vertices())
        .map(|v| if mesh.is_boundary(v) { values[v].clone() } else { vec![0.0; 2] })
        .collect();
    let direct = graph_laplacian_solution(&mesh, &boundary);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let affine_err = (0..mesh.num_vertices()).map(|v| dist(&values[v], &affine(v))).fold(0.0, f64::max);
    let direct_err = (0..mesh.num_vertices()).map(|v| dist(&values[v], &direct[v])).fold(0.0, f64::max);
    let detail = format!("max error vs affine {affine_err:.2e}, vs linear solve {direct_err:.2e}");
    if affine_err <= AFFINE_TOL && direct_err <= AFFINE_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn order_ladder() -> Outcome {
    let base = parse_scenario(&scenario_path("flat-linear")).map_err(|e| e.to_string())?;
    let mut errors = Vec::new();
    for k in ORDER_LADDER {
        let mut s: Scenario = base.clone();
        s.domain.resolution = k;
        let sigma = 10.0 / k as f64;
        s.analysis.sigmas = vec![sigma];
        s.analysis.basepoints = BasepointSpec::Points {
            points: vec![vec![0.5, 0.5]],
        };
        s.analysis.checks = Some(vec![CheckKind::Order]);
        let report = compute_report(&s).map_err(|e| e.to_string())?;
        let order = report
            .series
            .iter()
            .find(|p| p.series == "order")
            .ok_or("no order sample")?
            .value;
        errors.push((k, order, (order - 1.0).abs()));
    }
    let detail = errors
        .iter()
        .map(|(k, o, _)| format!("k = {k}: σE/I = {o:.6}"))
        .collect::<Vec<_>>()
        .join(", ");
    let within = errors.iter().all(|e| e.2 <= ORDER_TOL);
    // at a fixed σ/h the lattice is self-similar, so the error may be flat;
    // it must not grow
    let monotone = errors.windows(2).all(|w| w[1].2 <= w[0].2 * (1.0 + 1e-9) + 1e-15);
    if within && monotone {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tripod(runs: &Runs) -> Outcome {
    let r = &runs.results["square-tripod"];
    let s = &r.summary;
    if !r.converged || !(s.solver.last_decrease < SWEEP_DECREASE) {
        return Err(format!("converged {}, last decrease {:e}", r.converged, s.solver.last_decrease));
    }
    let margins = csv_rows(&runs.read("square-tripod", "margins.csv"));
    let bumps: Vec<_> = margins.iter().filter(|m| m["check"] == "target_variation").collect();
    let failing = bumps.iter().filter(|m| m["pass"] != "true").count();
    if bumps.len() != BUMP_COUNT || failing > 0 {
        return Err(format!("{} bumps, {failing} failing", bumps.len()));
    }
    let b = s.bochner.as_ref().ok_or("no Bochner report")?;
    let rows = csv_rows(&runs.read("square-tripod", "bochner.csv"));
    let passing = rows.iter().filter(|r| num(r, "residual_npc") >= -b.tolerance).count();
    let fraction = passing as f64 / rows.len() as f64;
    let detail = format!(
        "{} sweeps, last decrease {:.1e}; {} bumps pass; NPC residual passes at {passing}/{} vertices",
        s.solver.sweeps,
        s.solver.last_decrease,
        bumps.len(),
        rows.len()
    );
    if fraction >= BOCHNER_FRACTION && (fraction - b.npc_pass_fraction).abs() < 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn hyperbolic_identity(runs: &Runs) -> Outcome {
    let r = &runs.results["hyperbolic-identity"];
    if !r.converged {
        return Err("solver did not converge".into());
    }
    let (mesh, map) = runs.load("hyperbolic-identity");
    let snapshot = MapSnapshot::new(&mesh, &map).map_err(|e| e.to_string())?;
    // π in each vertex frame against the metric, which is the identity there
    let mut worst_pi: f64 = 0.0;
    for v in mesh.interior_vertices() {
        if let Some(t) = &snapshot.tensors[v] {
            let dev = (&t.matrix - DMatrix::<f64>::identity(2, 2)).norm() / 2f64.sqrt();
            worst_pi = worst_pi.max(dev);
        }
    }
    let c = r.summary.conformal.as_ref().ok_or("no conformal report")?;
    let rows = csv_rows(&runs.read("hyperbolic-identity", "bochner.csv"));
    let worst_res = rows.iter().map(|r| num(r, "residual_cat1").abs()).fold(0.0, f64::max);
    let detail = format!(
        "π deviation {:.2}%, λ ∈ [{:.4}, {:.4}], |CAT(-1) residual| ≤ {worst_res:.3} over {} vertices",
        100.0 * worst_pi,
        c.min_lambda,
        c.max_lambda,
        rows.len()
    );
    let lambda_ok = (c.min_lambda - 1.0).abs() <= LAMBDA_TOL && (c.max_lambda - 1.0).abs() <= LAMBDA_TOL;
    if worst_pi <= PULLBACK_TOL && lambda_ok && worst_res <= CAT1_RESIDUAL_TOL && !rows.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn totally_geodesic(runs: &Runs) -> Outcome {
    let s = &runs.results["torus-affine"].summary;
    let margins = csv_rows(&runs.read("torus-affine", "margins.csv"));
    let m = margins
        .iter()
        .find(|m| m["check"] == "totally_geodesic")
        .ok_or("no totally-geodesic margin")?;
    let defect = num(m, "rhs");
    let scenario = parse_scenario(&scenario_path("torus-affine")).map_err(|e| e.to_string())?;
    let samples = scenario.analysis.geodesics.map_or(0, |g| g.count);
    let detail = format!("max midpoint defect {defect:.2e} over {samples} segments, 2h = {:.3e}", 2.0 * s.mesh_size);
    if samples == GEODESIC_SAMPLES && defect <= 2.0 * s.mesh_size {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn comparison_fuzzing() -> Outcome {
    let tree = MetricTree::new(vec![
        TreeEdge { a: 0, b: 1, length: 1.0 },
        TreeEdge { a: 1, b: 2, length: 0.7 },
        TreeEdge { a: 1, b: 3, length: 1.3 },
        TreeEdge { a: 0, b: 4, length: 0.5 },
        TreeEdge { a: 4, b: 5, length: 2.0 },
    ])
    .map_err(|e| e.to_string())?;
    let spaces = [
        TargetSpace::Euclidean { dim: 3 },
        TargetSpace::Tree(tree.clone()),
        TargetSpace::HyperbolicPlane,
        TargetSpace::Product {
            factors: vec![TargetSpace::Tree(tree), TargetSpace::HyperbolicPlane],
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut counts = Vec::new();
    for space in &spaces {
        let mut passed = 0;
        for _ in 0..TRIANGLES {
            let a = space.random_point(&mut rng, 2.0);
            let b = space.random_point(&mut rng, 2.0);
            let c = space.random_point(&mut rng, 2.0);
            let t = rng.gen_range(0.0..=1.0);
            let npc = check_npc_comparison(space, &a, &b, &c, t).map_err(|e| e.to_string())?;
            let cat1 = match space {
                TargetSpace::HyperbolicPlane => check_cat1_comparison(space, &a, &b, &c, t).map_err(|e| e.to_string())?.pass,
                _ => true,
            };
            passed += (npc.pass && cat1) as usize;
        }
        counts.push(format!("{} {passed}/{TRIANGLES}", space.label()));
        if passed != TRIANGLES {
            return Err(counts.join(", "));
        }
    }
    // the side-1 equilateral triangle: Stewart gives √3/2, the curvature −1
    // law of cosines gives acosh(cosh 1 / cosh ½)
    let plane = TargetSpace::Euclidean { dim: 2 };
    let a = TargetPoint::Euclidean(vec![0.5, 3f64.sqrt() / 2.0]);
    let b = TargetPoint::Euclidean(vec![0.0, 0.0]);
    let c = TargetPoint::Euclidean(vec![1.0, 0.0]);
    let r = check_cat1_comparison(&plane, &a, &b, &c, 0.5).map_err(|e| e.to_string())?;
    let expected_rhs = (1f64.cosh() / 0.5f64.cosh()).acosh();
    let witness = ComparisonWitness {
        a,
        b,
        c,
        t: 0.5,
        lhs: r.lhs,
        rhs: r.rhs,
    };
    let back: ComparisonWitness =
        serde_json::from_str(&witness.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let detail = format!("{}; witness {:.4} vs {:.6}", counts.join(", "), r.lhs, r.rhs);
    if !r.pass
        && (r.lhs - 3f64.sqrt() / 2.0).abs() < 1e-12
        && (r.rhs - expected_rhs).abs() < 1e-9
        && back == witness
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism(runs: &Runs) -> Outcome {
    let mut compared = 0;
    for name in BUNDLED {
        let scenario = parse_scenario(&scenario_path(name)).map_err(|e| e.to_string())?;
        let again = runs.root.path().join("b").join(name);
        let r = run_scenario(&scenario, &again).map_err(|e| e.to_string())?;
        for f in r.manifest.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
            let file = f.file_name().unwrap();
            let first = std::fs::read(runs.dir(name).join(file)).map_err(|e| e.to_string())?;
            let second = std::fs::read(f).map_err(|e| e.to_string())?;
            if first != second {
                return Err(format!("{name}/{} differs between runs", file.to_string_lossy()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files identical across reruns of {} scenarios", BUNDLED.len()))
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let mut results = BTreeMap::new();
    for name in BUNDLED {
        let scenario = parse_scenario(&scenario_path(name)).expect("bundled scenario parses");
        let r = run_scenario(&scenario, &root.path().join("a").join(name)).expect("bundled scenario runs");
        results.insert(name, r);
    }
    let runs = Runs { root, results };

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("quadrature identities", Box::new(quadrature)),
        ("normal-coordinate volume density", Box::new(expansion_fidelity)),
        ("Bishop-Gromov σ³ coefficient", Box::new(bishop_gromov)),
        ("Euclidean solver oracle", Box::new(|| euclidean_solver_oracle(&runs))),
        ("order function ladder", Box::new(order_ladder)),
        ("square to tripod", Box::new(|| tripod(&runs))),
        ("hyperbolic identity equality case", Box::new(|| hyperbolic_identity(&runs))),
        ("totally geodesic affine torus map", Box::new(|| totally_geodesic(&runs))),
        ("comparison fuzzing", Box::new(comparison_fuzzing)),
        ("determinism", Box::new(|| determinism(&runs))),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} [{:.1?}]", k + 1, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
