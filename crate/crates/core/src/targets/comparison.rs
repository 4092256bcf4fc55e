use serde::{Deserialize, Serialize};

use super::{TargetPoint, TargetSpace};
use crate::error::{LabError, Result};

/// Outcome of a single comparison-triangle test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// `d(A, D)` with `D` a fraction `t` along `BC`.
    pub lhs: f64,
    /// The same distance in the comparison triangle.
    pub rhs: f64,
    pub pass: bool,
}

/// Record of a failing triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonWitness {
    #[serde(rename = "A")]
    pub a: TargetPoint,
    #[serde(rename = "B")]
    pub b: TargetPoint,
    #[serde(rename = "C")]
    pub c: TargetPoint,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl ComparisonWitness {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

const SLACK: f64 = 1e-12;

/// Side lengths `(|BC|, |AC|, |AB|)` after a consistency check.
fn sides(space: &TargetSpace, a: &TargetPoint, b: &TargetPoint, c: &TargetPoint) -> Result<(f64, f64, f64)> {
    let bc = space.distance(b, c)?;
    let ac = space.distance(a, c)?;
    let ab = space.distance(a, b)?;
    let slack = 1e-9 * (1.0 + bc + ac + ab);
    if bc > ac + ab + slack || ac > bc + ab + slack || ab > bc + ac + slack {
        return Err(LabError::TriangleInequality(bc, ac, ab));
    }
    Ok((bc, ac, ab))
}

fn tolerance(rhs: f64) -> f64 {
    1e-9 * (1.0 + rhs)
}

/// Euclidean comparison distance from `A` to the point a fraction `t`
/// along `BC`, by Stewart's theorem.
pub(crate) fn euclidean_median(a: f64, b: f64, c: f64, t: f64) -> f64 {
    ((1.0 - t) * c * c + t * b * b - t * (1.0 - t) * a * a).max(0.0).sqrt()
}

/// The same distance in the curvature −1 plane, via the hyperbolic law of
/// cosines at `B`.
pub(crate) fn hyperbolic_median(a: f64, b: f64, c: f64, t: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(c);
    }
    if c == 0.0 {
        return Ok(t * a);
    }
    let cos_b = (a.cosh() * c.cosh() - b.cosh()) / (a.sinh() * c.sinh());
    if cos_b.abs() > 1.0 + SLACK.max(1e-9 * (a + b + c)) {
        return Err(LabError::TriangleInequality(a, b, c));
    }
    let cos_b = cos_b.clamp(-1.0, 1.0);
    let ta = t * a;
    let ch = c.cosh() * ta.cosh() - c.sinh() * ta.sinh() * cos_b;
    Ok(ch.max(1.0).acosh())
}

pub fn check_npc_comparison(
    space: &TargetSpace,
    a: &TargetPoint,
    b: &TargetPoint,
    c: &TargetPoint,
    t: f64,
) -> Result<ComparisonResult> {
    let (ea, eb, ec) = sides(space, a, b, c)?;
    let d = space.interpolate(b, c, t)?;
    let lhs = space.distance(a, &d)?;
    let rhs = euclidean_median(ea, eb, ec, t);
    Ok(ComparisonResult {
        lhs,
        rhs,
        pass: lhs <= rhs + tolerance(rhs),
    })
}

pub fn check_cat1_comparison(
    space: &TargetSpace,
    a: &TargetPoint,
    b: &TargetPoint,
    c: &TargetPoint,
    t: f64,
) -> Result<ComparisonResult> {
    let (ea, eb, ec) = sides(space, a, b, c)?;
    let d = space.interpolate(b, c, t)?;
    let lhs = space.distance(a, &d)?;
    let rhs = hyperbolic_median(ea, eb, ec, t)?;
    Ok(ComparisonResult {
        lhs,
        rhs,
        pass: lhs <= rhs + tolerance(rhs),
    })
}
