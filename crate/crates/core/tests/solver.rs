use npc_lab::riemannian::build_mesh;
use npc_lab::solver::{dirichlet_energy, solve_harmonic, SolveOutcome, SweepMode};
use npc_lab::targets::{hyperbolic, FrechetConfig, MetricTree};
use npc_lab::{DomainTag, MapState, SolverConfig, TargetPoint, TargetSpace};
use proptest::prelude::*;

fn boundary_angle(p: [f64; 3]) -> f64 {
    (p[1] - 0.5).atan2(p[0] - 0.5)
}

fn solve(space: TargetSpace, mode: SweepMode, f: impl Fn(f64) -> TargetPoint) -> (f64, SolveOutcome) {
    let mesh = build_mesh(&DomainTag::FlatSquare, 12).unwrap();
    let initial = MapState::dirichlet_initial(&mesh, space, |v| f(boundary_angle(mesh.vertex(v).xyz)), &FrechetConfig::default())
        .unwrap();
    let e0 = dirichlet_energy(&mesh, &initial);
    let config = SolverConfig {
        max_sweeps: 400,
        sweep_mode: mode,
        ..SolverConfig::default()
    };
    (e0, solve_harmonic(&mesh, initial, &config).unwrap())
}

fn assert_monotone(e0: f64, outcome: &SolveOutcome) {
    let mut prev = e0;
    for r in &outcome.log.sweeps {
        assert!(r.energy <= prev * (1.0 + 1e-12) + 1e-14, "sweep {}: {} > {prev}", r.sweep, r.energy);
        prev = r.energy;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hyperbolic_energy_never_increases(radius in 0.2f64..2.0, winding in 1usize..3) {
        let (e0, out) = solve(TargetSpace::HyperbolicPlane, SweepMode::GaussSeidel, |th| {
            TargetPoint::Hyperbolic(hyperbolic::from_polar(radius, winding as f64 * th))
        });
        assert_monotone(e0, &out);
        prop_assert!(out.log.final_energy() <= e0);
    }

    #[test]
    fn tree_energy_never_increases(amplitude in 0.1f64..2.0, rays in 2usize..5) {
        let tree = MetricTree::star(rays, 2.0).unwrap();
        let space = TargetSpace::Tree(tree.clone());
        let (e0, out) = solve(space, SweepMode::GaussSeidel, |th| {
            let s = (th + std::f64::consts::PI) / std::f64::consts::TAU * rays as f64;
            let edge = (s.floor() as usize).min(rays - 1);
            let (edge, offset) = tree.canonical(edge, amplitude * (s - s.floor()).min(1.0));
            TargetPoint::Tree { edge, offset }
        });
        assert_monotone(e0, &out);
    }
}

#[test]
fn jacobi_energy_never_increases() {
    let (e0, out) = solve(TargetSpace::HyperbolicPlane, SweepMode::Jacobi, |th| {
        TargetPoint::Hyperbolic(hyperbolic::from_polar(1.0, th))
    });
    assert_monotone(e0, &out);
}

#[test]
fn boundary_values_are_fixed() {
    let mesh = build_mesh(&DomainTag::FlatSquare, 12).unwrap();
    let (_, out) = solve(TargetSpace::HyperbolicPlane, SweepMode::GaussSeidel, |th| {
        TargetPoint::Hyperbolic(hyperbolic::from_polar(0.7, th))
    });
    for v in 0..mesh.num_vertices() {
        if mesh.is_boundary(v) {
            let th = boundary_angle(mesh.vertex(v).xyz);
            assert_eq!(out.map.values[v], TargetPoint::Hyperbolic(hyperbolic::from_polar(0.7, th)));
        }
    }
}
