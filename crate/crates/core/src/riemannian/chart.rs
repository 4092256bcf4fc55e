use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::curvature::CurvatureData;
use super::quadrature::{gauss_legendre, integrate_quadratic_ball, QuadraticForm};
use crate::error::{LabError, Result};

/// Constant-curvature model with a closed-form metric in normal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ExactModel {
    Flat,
    RoundSphere { radius: f64 },
    Hyperbolic { radius: f64 },
}

impl ExactModel {
    pub fn sectional_curvature(self) -> f64 {
        match self {
            ExactModel::Flat => 0.0,
            ExactModel::RoundSphere { radius } => 1.0 / (radius * radius),
            ExactModel::Hyperbolic { radius } => -1.0 / (radius * radius),
        }
    }

    pub fn injectivity_radius(self) -> f64 {
        match self {
            ExactModel::RoundSphere { radius } => std::f64::consts::PI * radius,
            _ => f64::INFINITY,
        }
    }

    /// Warped-product profile: `g = dr² + s(r)² dθ²`.
    pub fn profile(self, r: f64) -> f64 {
        match self {
            ExactModel::Flat => r,
            ExactModel::RoundSphere { radius } => radius * (r / radius).sin(),
            ExactModel::Hyperbolic { radius } => radius * (r / radius).sinh(),
        }
    }

    /// `s(r)/r`, continuous at the origin.
    fn profile_ratio(self, r: f64) -> f64 {
        if r < 1e-8 {
            let k = self.sectional_curvature();
            1.0 - k * r * r / 6.0
        } else {
            self.profile(r) / r
        }
    }

    /// `|∂B_σ| / |B_σ|` for geodesic balls of the model in dimension `n`.
    pub fn sphere_ball_ratio(self, n: usize, sigma: f64) -> f64 {
        let area = self.profile(sigma).powi(n as i32 - 1);
        let volume = if n == 2 {
            match self {
                ExactModel::Flat => 0.5 * sigma * sigma,
                ExactModel::RoundSphere { radius } => {
                    2.0 * radius * radius * (0.5 * sigma / radius).sin().powi(2)
                }
                ExactModel::Hyperbolic { radius } => {
                    2.0 * radius * radius * (0.5 * sigma / radius).sinh().powi(2)
                }
            }
        } else {
            let (t, w) = gauss_legendre(40);
            t.iter()
                .zip(&w)
                .map(|(t, w)| {
                    let r = 0.5 * sigma * (t + 1.0);
                    0.5 * sigma * w * self.profile(r).powi(n as i32 - 1)
                })
                .sum()
        };
        area / volume
    }
}

/// Metric expansion with the optional closed-form value for comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEvaluation {
    pub expansion: DMatrix<f64>,
    pub exact: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEvaluation {
    pub expansion: f64,
    pub exact: Option<f64>,
}

/// Normal coordinates about a basepoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalChart {
    pub basepoint: usize,
    pub curvature: CurvatureData,
    pub validity_radius: f64,
    pub exact_model: Option<ExactModel>,
}

impl NormalChart {
    pub fn new(
        basepoint: usize,
        curvature: CurvatureData,
        validity_radius: f64,
        exact_model: Option<ExactModel>,
    ) -> Result<Self> {
        if !(validity_radius > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "validity radius must be positive, got {validity_radius}"
            )));
        }
        if let Some(m) = exact_model {
            if validity_radius >= m.injectivity_radius() {
                return Err(LabError::InvalidParameter(format!(
                    "validity radius {validity_radius} exceeds the injectivity radius {}",
                    m.injectivity_radius()
                )));
            }
        }
        Ok(Self {
            basepoint,
            curvature,
            validity_radius,
            exact_model,
        })
    }

    /// Chart on a constant-curvature model whose curvature data is derived
    /// from the model itself.
    pub fn from_model(n: usize, model: ExactModel, validity_radius: f64) -> Result<Self> {
        let curv = CurvatureData::space_form(n, model.sectional_curvature())?;
        Self::new(0, curv, validity_radius, Some(model))
    }

    pub fn dimension(&self) -> usize {
        self.curvature.dimension()
    }

    fn check_point(&self, x: &[f64]) -> Result<f64> {
        let n = self.dimension();
        if x.len() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.validity_radius {
            return Err(LabError::OutOfChart {
                norm,
                radius: self.validity_radius,
            });
        }
        Ok(norm)
    }

    /// `g_{ij}(x) ≈ δ_{ij} − ⅓ R_{kijℓ}(0) xᵏxˡ`.
    pub fn evaluate_metric_expansion(&self, x: &[f64]) -> Result<MetricEvaluation> {
        let r = self.check_point(x)?;
        let n = self.dimension();
        let c = &self.curvature;
        let expansion = DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += c.r(k, i, j, l) * x[k] * x[l];
                }
            }
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - s / 3.0
        });
        let exact = self.exact_model.map(|m| {
            let q = m.profile_ratio(r).powi(2);
            DMatrix::from_fn(n, n, |i, j| {
                let delta = if i == j { 1.0 } else { 0.0 };
                let radial = if r > 0.0 { x[i] * x[j] / (r * r) } else { 0.0 };
                radial + q * (delta - radial)
            })
        });
        Ok(MetricEvaluation { expansion, exact })
    }

    /// `√g(x) ≈ 1 − ⅙ Ric_{ij}(0) xⁱxʲ`.
    pub fn evaluate_volume_density(&self, x: &[f64]) -> Result<DensityEvaluation> {
        let r = self.check_point(x)?;
        let n = self.dimension();
        let expansion = 1.0 - self.curvature.ricci_form(x) / 6.0;
        let exact = self
            .exact_model
            .map(|m| m.profile_ratio(r).powi(n as i32 - 1));
        Ok(DensityEvaluation { expansion, exact })
    }
}

/// One row of a Bishop–Gromov profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BishopGromovSample {
    pub sigma: f64,
    /// Exact `|∂B_σ|/|B_σ|`, present only for charts with an exact model.
    pub measured: Option<f64>,
    /// `n/σ − S σ / (3(n+2))`.
    pub prediction: f64,
    pub residual: Option<f64>,
}

/// Ratio of sphere area to ball volume against its small-radius prediction.
pub fn bishop_gromov_profile(chart: &NormalChart, sigmas: &[f64]) -> Result<Vec<BishopGromovSample>> {
    let n = chart.dimension();
    let s = chart.curvature.scalar();
    if chart.exact_model.is_none() {
        log::warn!("chart has no exact model: Bishop–Gromov profile is prediction-only");
    }
    sigmas
        .iter()
        .map(|&sigma| {
            if !(sigma > 0.0) || sigma >= chart.validity_radius {
                return Err(LabError::OutOfChart {
                    norm: sigma,
                    radius: chart.validity_radius,
                });
            }
            let prediction = n as f64 / sigma - s * sigma / (3.0 * (n as f64 + 2.0));
            let measured = chart.exact_model.map(|m| m.sphere_ball_ratio(n, sigma));
            Ok(BishopGromovSample {
                sigma,
                measured,
                prediction,
                residual: measured.map(|m| m - prediction),
            })
        })
        .collect()
}

/// Ball integrals of `x ↦ Ric(x, x)` and `x ↦ ⟨R(x, v)v, x⟩`:
/// `(ω_n/(n+2)) S σ^{n+2}` and `(ω_n/(n+2)) Ric(v, v) σ^{n+2}`.
pub fn curvature_ball_integrals(curv: &CurvatureData, v: &[f64], sigma: f64) -> Result<(f64, f64)> {
    let n = curv.dimension();
    if v.len() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(LabError::InvalidParameter("direction vector is zero".into()));
    }
    let unit: Vec<f64> = if (norm - 1.0).abs() > 1e-12 {
        log::warn!("direction vector has norm {norm}; normalizing");
        v.iter().map(|a| a / norm).collect()
    } else {
        v.to_vec()
    };
    let ric = QuadraticForm::new(curv.ricci().clone())?;
    let sec = QuadraticForm::new(curv.sectional_form(&unit))?;
    Ok((
        integrate_quadratic_ball(&ric, sigma, n)?,
        integrate_quadratic_ball(&sec, sigma, n)?,
    ))
}
