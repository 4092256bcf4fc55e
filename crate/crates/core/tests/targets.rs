use npc_lab::targets::{
    check_cat1_comparison, check_npc_comparison, frechet_mean, mean_objective, FrechetConfig, MetricTree, TreeEdge,
};
use npc_lab::{CurvatureClass, TargetPoint, TargetSpace};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree() -> MetricTree {
    MetricTree::new(vec![
        TreeEdge { a: 0, b: 1, length: 1.0 },
        TreeEdge { a: 1, b: 2, length: 0.6 },
        TreeEdge { a: 1, b: 3, length: 1.4 },
        TreeEdge { a: 0, b: 4, length: 0.8 },
        TreeEdge { a: 4, b: 5, length: 0.3 },
        TreeEdge { a: 4, b: 6, length: 2.0 },
    ])
    .unwrap()
}

fn spaces() -> Vec<TargetSpace> {
    vec![
        TargetSpace::Euclidean { dim: 2 },
        TargetSpace::Tree(tree()),
        TargetSpace::HyperbolicPlane,
        TargetSpace::Product {
            factors: vec![TargetSpace::Euclidean { dim: 1 }, TargetSpace::HyperbolicPlane],
        },
    ]
}

fn points(space: &TargetSpace, seed: u64, k: usize) -> Vec<TargetPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| space.random_point(&mut rng, 2.5)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metric_axioms(seed in any::<u64>(), which in 0usize..4) {
        let space = &spaces()[which];
        let p = points(space, seed, 3);
        let d = |i: usize, j: usize| space.distance(&p[i], &p[j]).unwrap();
        prop_assert!(d(0, 0).abs() < 1e-12);
        prop_assert!(d(0, 1) >= 0.0);
        prop_assert!(close(d(0, 1), d(1, 0), 1e-12));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }

    #[test]
    fn geodesics_have_constant_speed(seed in any::<u64>(), which in 0usize..4, t in 0.0f64..=1.0) {
        let space = &spaces()[which];
        let p = points(space, seed, 2);
        let total = space.distance(&p[0], &p[1]).unwrap();
        let m = space.interpolate(&p[0], &p[1], t).unwrap();
        space.contains(&m).unwrap();
        prop_assert!(close(space.distance(&p[0], &m).unwrap(), t * total, 1e-8));
        prop_assert!(close(space.distance(&m, &p[1]).unwrap(), (1.0 - t) * total, 1e-8));
    }

    #[test]
    fn geodesic_endpoints(seed in any::<u64>(), which in 0usize..4) {
        let space = &spaces()[which];
        let p = points(space, seed, 2);
        let start = space.interpolate(&p[0], &p[1], 0.0).unwrap();
        let end = space.interpolate(&p[0], &p[1], 1.0).unwrap();
        prop_assert!(space.distance(&start, &p[0]).unwrap() < 1e-9);
        prop_assert!(space.distance(&end, &p[1]).unwrap() < 1e-9);
    }

    #[test]
    fn every_target_satisfies_npc_comparison(seed in any::<u64>(), which in 0usize..4, t in 0.0f64..=1.0) {
        let space = &spaces()[which];
        let p = points(space, seed, 3);
        let r = check_npc_comparison(space, &p[0], &p[1], &p[2], t).unwrap();
        prop_assert!(r.pass, "lhs {} rhs {}", r.lhs, r.rhs);
    }

    #[test]
    fn cat1_targets_satisfy_cat1_comparison(seed in any::<u64>(), which in 1usize..3, t in 0.0f64..=1.0) {
        let space = &spaces()[which];
        // trees are CAT(κ) for every κ, though they are labelled NPC
        let p = points(space, seed, 3);
        let r = check_cat1_comparison(space, &p[0], &p[1], &p[2], t).unwrap();
        prop_assert!(r.pass, "lhs {} rhs {}", r.lhs, r.rhs);
    }

    #[test]
    fn frechet_mean_minimizes(seed in any::<u64>(), which in 0usize..4, k in 2usize..7) {
        let space = &spaces()[which];
        let p = points(space, seed, k + 3);
        let weights: Vec<f64> = (0..k).map(|i| 0.5 + ((seed >> i) & 7) as f64).collect();
        let data: Vec<(&TargetPoint, f64)> = p[..k].iter().zip(weights.iter().cloned()).collect();
        let mean = frechet_mean(space, &data, &FrechetConfig::default()).unwrap();
        let best = mean_objective(space, &data, &mean).unwrap();
        for q in &p {
            for s in [0.01, 0.1, 0.5] {
                let nearby = space.interpolate(&mean, q, s).unwrap();
                let f = mean_objective(space, &data, &nearby).unwrap();
                prop_assert!(f >= best - 1e-8 * (1.0 + best), "{f} < {best}");
            }
        }
    }

    #[test]
    fn two_point_mean_is_the_midpoint(seed in any::<u64>(), which in 0usize..4) {
        let space = &spaces()[which];
        let p = points(space, seed, 2);
        let mean = frechet_mean(space, &[(&p[0], 1.0), (&p[1], 1.0)], &FrechetConfig::default()).unwrap();
        let mid = space.interpolate(&p[0], &p[1], 0.5).unwrap();
        prop_assert!(space.distance(&mean, &mid).unwrap() < 1e-6);
    }
}

#[test]
fn euclidean_plane_fails_cat1_on_the_equilateral_triangle() {
    let plane = TargetSpace::Euclidean { dim: 2 };
    let a = TargetPoint::Euclidean(vec![0.5, 3f64.sqrt() / 2.0]);
    let b = TargetPoint::Euclidean(vec![0.0, 0.0]);
    let c = TargetPoint::Euclidean(vec![1.0, 0.0]);
    let r = check_cat1_comparison(&plane, &a, &b, &c, 0.5).unwrap();
    assert!(!r.pass);
    assert!((r.lhs - 0.8660254037844386).abs() < 1e-12);
    assert!((r.rhs - 0.834025).abs() < 1e-6);
    assert!(check_npc_comparison(&plane, &a, &b, &c, 0.5).unwrap().pass);
}

#[test]
fn mismatched_points_are_rejected() {
    let p = TargetPoint::Euclidean(vec![0.0, 0.0]);
    let q = TargetPoint::Hyperbolic([1.0, 0.0, 0.0]);
    assert!(TargetSpace::HyperbolicPlane.distance(&p, &q).is_err());
    assert!(TargetSpace::Euclidean { dim: 3 }.contains(&p).is_err());
}

#[test]
fn only_the_hyperbolic_plane_is_labelled_cat1() {
    let labels: Vec<CurvatureClass> = spaces().iter().map(TargetSpace::curvature_class).collect();
    assert_eq!(
        labels,
        [CurvatureClass::Npc, CurvatureClass::Npc, CurvatureClass::CatMinus1, CurvatureClass::Npc]
    );
}
