//! Shared fixtures for the criterion benchmarks.

use npc_lab::riemannian::build_mesh;
use npc_lab::targets::{hyperbolic, FrechetConfig};
use npc_lab::{DomainTag, MapState, MeshDomain, TargetPoint, TargetSpace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Square mesh with the boundary wrapped once around a hyperbolic circle
/// and the interior at the Fréchet mean of the boundary.
pub fn hyperbolic_disk_problem(resolution: usize, radius: f64) -> (MeshDomain, MapState) {
    let mesh = build_mesh(&DomainTag::FlatSquare, resolution).expect("square mesh");
    let map = MapState::dirichlet_initial(
        &mesh,
        TargetSpace::HyperbolicPlane,
        |v| {
            let p = mesh.vertex(v).xyz;
            TargetPoint::Hyperbolic(hyperbolic::from_polar(radius, (p[1] - 0.5).atan2(p[0] - 0.5)))
        },
        &FrechetConfig::default(),
    )
    .expect("initial map");
    (mesh, map)
}

/// `count` random weighted points of `space`.
pub fn weighted_cloud(space: &TargetSpace, count: usize, seed: u64) -> Vec<(TargetPoint, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| (space.random_point(&mut rng, 1.5), 1.0 + (i % 3) as f64))
        .collect()
}
