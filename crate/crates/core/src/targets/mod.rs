//! NPC and CAT(-1) target spaces: distances, geodesics, comparison
//! triangles and weighted Fréchet means.

mod comparison;
mod frechet;
pub mod hyperbolic;
mod tree;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use comparison::{
    check_cat1_comparison, check_npc_comparison, ComparisonResult, ComparisonWitness,
};
pub use frechet::{frechet_mean, mean_objective, FrechetConfig};
pub use tree::{MetricTree, TreeEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CurvatureClass {
    #[serde(rename = "NPC")]
    Npc,
    #[serde(rename = "CAT_MINUS_1")]
    CatMinus1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpace {
    Euclidean { dim: usize },
    Tree(MetricTree),
    HyperbolicPlane,
    Product { factors: Vec<TargetSpace> },
}

/// A point of a [`TargetSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TargetPoint {
    Euclidean(Vec<f64>),
    /// Offset measured from the first endpoint of `edge`.
    Tree { edge: usize, offset: f64 },
    /// Hyperboloid coordinates `(x₀, x₁, x₂)` with `x₀² − x₁² − x₂² = 1`.
    Hyperbolic([f64; 3]),
    Product(Vec<TargetPoint>),
}

impl TargetSpace {
    pub fn curvature_class(&self) -> CurvatureClass {
        match self {
            TargetSpace::HyperbolicPlane => CurvatureClass::CatMinus1,
            _ => CurvatureClass::Npc,
        }
    }

    pub fn label(&self) -> String {
        match self {
            TargetSpace::Euclidean { dim } => format!("euclidean({dim})"),
            TargetSpace::Tree(t) => format!("tree({} edges)", t.edges().len()),
            TargetSpace::HyperbolicPlane => "hyperbolic_plane".into(),
            TargetSpace::Product { factors } => {
                let parts: Vec<_> = factors.iter().map(|f| f.label()).collect();
                format!("product[{}]", parts.join(", "))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetSpace::Euclidean { dim } if *dim == 0 => Err(LabError::InvalidDimension(0)),
            TargetSpace::Product { factors } => {
                if factors.is_empty() {
                    return Err(LabError::InvalidParameter("product with no factors".into()));
                }
                factors.iter().try_for_each(|f| f.validate())
            }
            _ => Ok(()),
        }
    }

    /// Checks that `p` belongs to this space.
    pub fn contains(&self, p: &TargetPoint) -> Result<()> {
        match (self, p) {
            (TargetSpace::Euclidean { dim }, TargetPoint::Euclidean(x)) => {
                if x.len() == *dim {
                    Ok(())
                } else {
                    Err(LabError::DimensionMismatch {
                        expected: *dim,
                        found: x.len(),
                    })
                }
            }
            (TargetSpace::Tree(t), TargetPoint::Tree { edge, offset }) => t.check_point(*edge, *offset),
            (TargetSpace::HyperbolicPlane, TargetPoint::Hyperbolic(x)) => {
                let c = x[0] * x[0] - x[1] * x[1] - x[2] * x[2];
                if x[0] > 0.0 && (c - 1.0).abs() <= 1e-9 * x[0] * x[0] {
                    Ok(())
                } else {
                    Err(LabError::SpaceMismatch(format!("{x:?} is off the hyperboloid")))
                }
            }
            (TargetSpace::Product { factors }, TargetPoint::Product(ps)) => {
                if factors.len() != ps.len() {
                    return Err(LabError::DimensionMismatch {
                        expected: factors.len(),
                        found: ps.len(),
                    });
                }
                factors.iter().zip(ps).try_for_each(|(f, p)| f.contains(p))
            }
            _ => Err(mismatch(self, p)),
        }
    }

    pub fn distance(&self, p: &TargetPoint, q: &TargetPoint) -> Result<f64> {
        match (self, p, q) {
            (TargetSpace::Euclidean { .. }, TargetPoint::Euclidean(a), TargetPoint::Euclidean(b)) => {
                if a.len() != b.len() {
                    return Err(LabError::DimensionMismatch {
                        expected: a.len(),
                        found: b.len(),
                    });
                }
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
            (
                TargetSpace::Tree(t),
                TargetPoint::Tree { edge: e1, offset: t1 },
                TargetPoint::Tree { edge: e2, offset: t2 },
            ) => Ok(t.distance((*e1, *t1), (*e2, *t2))),
            (TargetSpace::HyperbolicPlane, TargetPoint::Hyperbolic(a), TargetPoint::Hyperbolic(b)) => {
                Ok(hyperbolic::distance(a, b))
            }
            (TargetSpace::Product { factors }, TargetPoint::Product(a), TargetPoint::Product(b)) => {
                if a.len() != factors.len() || b.len() != factors.len() {
                    return Err(mismatch(self, p));
                }
                let mut s = 0.0;
                for ((f, x), y) in factors.iter().zip(a).zip(b) {
                    s += f.distance(x, y)?.powi(2);
                }
                Ok(s.sqrt())
            }
            _ => Err(mismatch(self, if matches_kind(self, p) { q } else { p })),
        }
    }

    /// Point a fraction `t` of the way along the geodesic from `p` to `q`.
    pub fn interpolate(&self, p: &TargetPoint, q: &TargetPoint, t: f64) -> Result<TargetPoint> {
        if !(0.0..=1.0).contains(&t) {
            return Err(LabError::ParameterOutOfRange(t));
        }
        match (self, p, q) {
            (TargetSpace::Euclidean { .. }, TargetPoint::Euclidean(a), TargetPoint::Euclidean(b)) => {
                if t == 0.0 {
                    return Ok(p.clone());
                }
                if t == 1.0 {
                    return Ok(q.clone());
                }
                Ok(TargetPoint::Euclidean(
                    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect(),
                ))
            }
            (
                TargetSpace::Tree(tr),
                TargetPoint::Tree { edge: e1, offset: t1 },
                TargetPoint::Tree { edge: e2, offset: t2 },
            ) => {
                let (edge, offset) = tr.interpolate((*e1, *t1), (*e2, *t2), t);
                Ok(TargetPoint::Tree { edge, offset })
            }
            (TargetSpace::HyperbolicPlane, TargetPoint::Hyperbolic(a), TargetPoint::Hyperbolic(b)) => {
                Ok(TargetPoint::Hyperbolic(hyperbolic::interpolate(a, b, t)))
            }
            (TargetSpace::Product { factors }, TargetPoint::Product(a), TargetPoint::Product(b)) => {
                if a.len() != factors.len() || b.len() != factors.len() {
                    return Err(mismatch(self, p));
                }
                let parts = factors
                    .iter()
                    .zip(a)
                    .zip(b)
                    .map(|((f, x), y)| f.interpolate(x, y, t))
                    .collect::<Result<Vec<_>>>()?;
                Ok(TargetPoint::Product(parts))
            }
            _ => Err(mismatch(self, if matches_kind(self, p) { q } else { p })),
        }
    }

    /// Random point at distance of order `scale` from the space's origin.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> TargetPoint {
        match self {
            TargetSpace::Euclidean { dim } => {
                TargetPoint::Euclidean((0..*dim).map(|_| rng.gen_range(-scale..scale)).collect())
            }
            TargetSpace::Tree(t) => {
                let e = rng.gen_range(0..t.edges().len());
                let len = t.edges()[e].length;
                let (edge, offset) = t.canonical(e, rng.gen_range(0.0..=len));
                TargetPoint::Tree { edge, offset }
            }
            TargetSpace::HyperbolicPlane => {
                let r = rng.gen_range(0.0..scale);
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                TargetPoint::Hyperbolic(hyperbolic::from_polar(r, th))
            }
            TargetSpace::Product { factors } => {
                TargetPoint::Product(factors.iter().map(|f| f.random_point(rng, scale)).collect())
            }
        }
    }
}

fn matches_kind(space: &TargetSpace, p: &TargetPoint) -> bool {
    matches!(
        (space, p),
        (TargetSpace::Euclidean { .. }, TargetPoint::Euclidean(_))
            | (TargetSpace::Tree(_), TargetPoint::Tree { .. })
            | (TargetSpace::HyperbolicPlane, TargetPoint::Hyperbolic(_))
            | (TargetSpace::Product { .. }, TargetPoint::Product(_))
    )
}

fn mismatch(space: &TargetSpace, p: &TargetPoint) -> LabError {
    LabError::SpaceMismatch(format!("{p:?} is not a point of {}", space.label()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tripod() -> TargetSpace {
        TargetSpace::Tree(MetricTree::star(3, 2.0).unwrap())
    }

    #[test]
    fn classes() {
        assert_eq!(TargetSpace::HyperbolicPlane.curvature_class(), CurvatureClass::CatMinus1);
        assert_eq!(tripod().curvature_class(), CurvatureClass::Npc);
        let prod = TargetSpace::Product {
            factors: vec![TargetSpace::HyperbolicPlane, TargetSpace::HyperbolicPlane],
        };
        assert_eq!(prod.curvature_class(), CurvatureClass::Npc);
    }

    #[test]
    fn euclidean_basics() {
        let s = TargetSpace::Euclidean { dim: 2 };
        let p = TargetPoint::Euclidean(vec![0.0, 0.0]);
        let q = TargetPoint::Euclidean(vec![3.0, 4.0]);
        assert_eq!(s.distance(&p, &p).unwrap(), 0.0);
        assert_eq!(s.distance(&p, &q).unwrap(), 5.0);
        assert_eq!(
            s.interpolate(&p, &q, 0.25).unwrap(),
            TargetPoint::Euclidean(vec![0.75, 1.0])
        );
        assert_eq!(s.interpolate(&p, &q, 1.0).unwrap(), q);
        assert!(matches!(s.interpolate(&p, &q, 1.5), Err(LabError::ParameterOutOfRange(_))));
    }

    #[test]
    fn tripod_distance_and_interpolation() {
        let s = tripod();
        let p = TargetPoint::Tree { edge: 0, offset: 0.3 };
        let q = TargetPoint::Tree { edge: 1, offset: 0.4 };
        assert!((s.distance(&p, &q).unwrap() - 0.7).abs() < 1e-15);
        let a = TargetPoint::Tree { edge: 0, offset: 1.0 };
        let b = TargetPoint::Tree { edge: 1, offset: 1.0 };
        match s.interpolate(&a, &b, 0.25).unwrap() {
            TargetPoint::Tree { edge, offset } => {
                assert_eq!(edge, 0);
                assert!((offset - 0.5).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn mismatched_kinds() {
        let s = TargetSpace::Euclidean { dim: 1 };
        let p = TargetPoint::Euclidean(vec![0.0]);
        let q = TargetPoint::Tree { edge: 0, offset: 0.0 };
        assert!(matches!(s.distance(&p, &q), Err(LabError::SpaceMismatch(_))));
        assert!(s.contains(&TargetPoint::Euclidean(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn product_distance_is_l2() {
        let s = TargetSpace::Product {
            factors: vec![TargetSpace::Euclidean { dim: 1 }, tripod()],
        };
        let p = TargetPoint::Product(vec![
            TargetPoint::Euclidean(vec![0.0]),
            TargetPoint::Tree { edge: 0, offset: 0.0 },
        ]);
        let q = TargetPoint::Product(vec![
            TargetPoint::Euclidean(vec![3.0]),
            TargetPoint::Tree { edge: 2, offset: 4.0 / 2.0 },
        ]);
        assert!((s.distance(&p, &q).unwrap() - 13f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn json_shapes() {
        let s: TargetSpace = serde_json::from_str(
            r#"{"kind":"tree","edges":[{"a":0,"b":1,"length":1.0},{"a":0,"b":2,"length":1.0}]}"#,
        )
        .unwrap();
        assert_eq!(s.curvature_class(), CurvatureClass::Npc);
        let h: TargetSpace = serde_json::from_str(r#"{"kind":"hyperbolic_plane"}"#).unwrap();
        assert_eq!(h, TargetSpace::HyperbolicPlane);
        let p = TargetPoint::Euclidean(vec![1.0]);
        let txt = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<TargetPoint>(&txt).unwrap(), p);
    }
}
