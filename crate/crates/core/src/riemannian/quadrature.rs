//! Integrals of quadratic forms over Euclidean spheres and balls.
//!
//! Each closed form has a numeric companion: a deterministic product rule for
//! `n ≤ 3` (uniform angles on the circle; Gauss–Legendre in `cos θ` times
//! uniform azimuth on `S²`) and Monte-Carlo with a reported standard error for
//! `n > 3`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::unit_ball_volume;

/// Symmetric matrix `Q_{ij}` of the quadratic form `Q(x) = Q_{ij}xⁱxʲ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    matrix: DMatrix<f64>,
}

impl QuadraticForm {
    /// Accepts a square matrix that is symmetric to `1e-12` relative and
    /// stores its exact symmetrization.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 {
            return Err(LabError::InvalidDimension(0));
        }
        if matrix.ncols() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                found: matrix.ncols(),
            });
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(LabError::InvalidParameter(format!(
                "quadratic form matrix is not symmetric (defect {asym:e})"
            )));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { matrix: sym })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `Q : Q̃ = Q_{ij}Q̃_{ji}`.
    pub fn contract(&self, other: &Self) -> f64 {
        self.matrix.component_mul(&other.matrix.transpose()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.matrix[(i, j)] * x[i] * x[j];
            }
        }
        s
    }

    /// Random symmetric form with entries uniform in `[-1, 1]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { matrix: m }
    }
}

fn check_args(n: usize, sigma: f64) -> Result<()> {
    if n < 1 {
        return Err(LabError::InvalidDimension(n));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(LabError::InvalidParameter(format!("radius must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_dim(q: &QuadraticForm, n: usize) -> Result<()> {
    if q.dim() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            found: q.dim(),
        });
    }
    Ok(())
}

/// `∫_{∂B_σ} Q(x) dS = ω_n tr(Q) σ^{n+1}`.
pub fn integrate_quadratic_sphere(q: &QuadraticForm, sigma: f64, n: usize) -> Result<f64> {
    check_args(n, sigma)?;
    check_dim(q, n)?;
    Ok(unit_ball_volume(n) * q.trace() * sigma.powi(n as i32 + 1))
}

/// `∫_{B_σ} Q(x) dx = ω_n/(n+2) tr(Q) σ^{n+2}`.
pub fn integrate_quadratic_ball(q: &QuadraticForm, sigma: f64, n: usize) -> Result<f64> {
    check_args(n, sigma)?;
    check_dim(q, n)?;
    Ok(unit_ball_volume(n) / (n as f64 + 2.0) * q.trace() * sigma.powi(n as i32 + 2))
}

/// `∫_{∂B_σ} Q(x)Q̃(x) dS = ω_n/(n+2) (2Q:Q̃ + tr Q tr Q̃) σ^{n+3}`.
pub fn integrate_quadratic_product_sphere(
    q: &QuadraticForm,
    qt: &QuadraticForm,
    sigma: f64,
    n: usize,
) -> Result<f64> {
    check_args(n, sigma)?;
    check_dim(q, n)?;
    check_dim(qt, n)?;
    Ok(unit_ball_volume(n) / (n as f64 + 2.0)
        * (2.0 * q.contract(qt) + q.trace() * qt.trace())
        * sigma.powi(n as i32 + 3))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Numeric integral with an optional Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericEstimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Integration rule on the unit sphere `S^{n-1}`.
#[derive(Debug, Clone)]
pub enum SphereRule {
    /// Points and weights whose weights sum to `|S^{n-1}|`.
    Deterministic { points: Vec<Vec<f64>>, weights: Vec<f64> },
    MonteCarlo { samples: usize, seed: u64 },
}

impl SphereRule {
    /// Deterministic rule exact for polynomials of degree `≤ 2·order − 1`
    /// when `n ≤ 3`, Monte-Carlo otherwise.
    pub fn for_dimension(n: usize, order: usize, seed: u64) -> Self {
        match n {
            1 => SphereRule::Deterministic {
                points: vec![vec![1.0], vec![-1.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let m = 2 * order;
                let points = (0..m)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / m as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect();
                SphereRule::Deterministic {
                    points,
                    weights: vec![2.0 * PI / m as f64; m],
                }
            }
            3 => {
                let (z, wz) = gauss_legendre(order);
                let m = 2 * order;
                let mut points = Vec::with_capacity(order * m);
                let mut weights = Vec::with_capacity(order * m);
                for (zi, wi) in z.iter().zip(&wz) {
                    let rho = (1.0 - zi * zi).sqrt();
                    for k in 0..m {
                        let t = 2.0 * PI * k as f64 / m as f64;
                        points.push(vec![rho * t.cos(), rho * t.sin(), *zi]);
                        weights.push(wi * 2.0 * PI / m as f64);
                    }
                }
                SphereRule::Deterministic { points, weights }
            }
            _ => SphereRule::MonteCarlo {
                samples: 200_000,
                seed,
            },
        }
    }

    /// `∫_{S^{n-1}} f`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, n: usize, f: F) -> NumericEstimate {
        match self {
            SphereRule::Deterministic { points, weights } => NumericEstimate {
                value: points.iter().zip(weights).map(|(p, w)| w * f(p)).sum(),
                std_error: None,
            },
            SphereRule::MonteCarlo { samples, seed } => {
                let area = n as f64 * unit_ball_volume(n);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let normal = rand_normal_iter(&mut rng, n, *samples);
                let (mut sum, mut sum2) = (0.0, 0.0);
                for p in normal {
                    let v = f(&p);
                    sum += v;
                    sum2 += v * v;
                }
                let m = *samples as f64;
                let mean = sum / m;
                let var = (sum2 / m - mean * mean).max(0.0);
                NumericEstimate {
                    value: area * mean,
                    std_error: Some(area * (var / m).sqrt()),
                }
            }
        }
    }
}

fn rand_normal_iter<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| loop {
            let mut v: Vec<f64> = (0..n)
                .map(|_| {
                    // Box–Muller
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                v.iter_mut().for_each(|x| *x /= norm);
                break v;
            }
        })
        .collect()
}

/// Numeric `∫_{∂B_σ} f(x) dS` for `f` supplied in Euclidean coordinates.
pub fn numeric_sphere_integral<F: Fn(&[f64]) -> f64>(
    rule: &SphereRule,
    n: usize,
    sigma: f64,
    f: F,
) -> NumericEstimate {
    let scale = sigma.powi(n as i32 - 1);
    let est = rule.integrate(n, |p| {
        let x: Vec<f64> = p.iter().map(|c| c * sigma).collect();
        f(&x)
    });
    NumericEstimate {
        value: est.value * scale,
        std_error: est.std_error.map(|s| s * scale),
    }
}

/// Numeric `∫_{B_σ} f(x) dx` by Gauss–Legendre in the radius times `rule`.
pub fn numeric_ball_integral<F: Fn(&[f64]) -> f64>(
    rule: &SphereRule,
    n: usize,
    sigma: f64,
    radial_order: usize,
    f: F,
) -> NumericEstimate {
    let (nodes, weights) = gauss_legendre(radial_order);
    let mut value = 0.0;
    let mut var = 0.0;
    let mut stochastic = false;
    for (t, w) in nodes.iter().zip(&weights) {
        let r = 0.5 * sigma * (t + 1.0);
        let est = numeric_sphere_integral(rule, n, r, &f);
        let jac = 0.5 * sigma * w;
        value += jac * est.value;
        if let Some(se) = est.std_error {
            stochastic = true;
            var += (jac * se).powi(2);
        }
    }
    NumericEstimate {
        value,
        std_error: stochastic.then(|| var.sqrt()),
    }
}

/// Which closed form a quadrature report row checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Sphere,
    Ball,
    ProductSphere,
}

impl FormKind {
    pub fn label(self) -> &'static str {
        match self {
            FormKind::Sphere => "sphere",
            FormKind::Ball => "ball",
            FormKind::ProductSphere => "product_sphere",
        }
    }
}

/// One analytic-vs-numeric comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRow {
    pub form_id: String,
    pub kind: FormKind,
    pub n: usize,
    pub sigma: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub std_error: Option<f64>,
    pub rel_err: f64,
}

/// Relative error normalised by the size of the integrand, so that forms
/// whose integral happens to vanish (traceless `Q`) are not penalised.
fn relative_error(analytic: f64, numeric: f64, scale: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(scale).max(f64::MIN_POSITIVE)
}

/// Compare the three closed forms against numeric quadrature for one pair.
pub fn compare_forms(
    form_id: &str,
    q: &QuadraticForm,
    qt: &QuadraticForm,
    sigma: f64,
) -> Result<Vec<QuadratureRow>> {
    let n = q.dim();
    check_dim(qt, n)?;
    let rule = SphereRule::for_dimension(n, 8, 0x5eed ^ n as u64);
    let wn = unit_ball_volume(n);
    let fq = |x: &[f64]| q.eval(x);
    let fqq = |x: &[f64]| q.eval(x) * qt.eval(x);
    let qn = q.matrix().norm();
    let qtn = qt.matrix().norm();

    let mut rows = Vec::with_capacity(3);
    let analytic = integrate_quadratic_sphere(q, sigma, n)?;
    let num = numeric_sphere_integral(&rule, n, sigma, fq);
    rows.push(QuadratureRow {
        form_id: form_id.to_string(),
        kind: FormKind::Sphere,
        n,
        sigma,
        analytic,
        numeric: num.value,
        std_error: num.std_error,
        rel_err: relative_error(analytic, num.value, wn * qn * sigma.powi(n as i32 + 1)),
    });
    let analytic = integrate_quadratic_ball(q, sigma, n)?;
    let num = numeric_ball_integral(&rule, n, sigma, 8, fq);
    rows.push(QuadratureRow {
        form_id: form_id.to_string(),
        kind: FormKind::Ball,
        n,
        sigma,
        analytic,
        numeric: num.value,
        std_error: num.std_error,
        rel_err: relative_error(analytic, num.value, wn * qn * sigma.powi(n as i32 + 2)),
    });
    let analytic = integrate_quadratic_product_sphere(q, qt, sigma, n)?;
    let num = numeric_sphere_integral(&rule, n, sigma, fqq);
    rows.push(QuadratureRow {
        form_id: form_id.to_string(),
        kind: FormKind::ProductSphere,
        n,
        sigma,
        analytic,
        numeric: num.value,
        std_error: num.std_error,
        rel_err: relative_error(analytic, num.value, wn * qn * qtn * sigma.powi(n as i32 + 3)),
    });
    Ok(rows)
}

/// Randomized self-test over `cases` pairs per `(n, σ)` combination.
pub fn quadrature_selftest(
    seed: u64,
    cases: usize,
    dims: &[usize],
    sigmas: &[f64],
) -> Result<Vec<QuadratureRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &n in dims {
        for c in 0..cases {
            let q = QuadraticForm::random(n, &mut rng);
            let qt = QuadraticForm::random(n, &mut rng);
            for &s in sigmas {
                rows.extend(compare_forms(&format!("q{c}"), &q, &qt, s)?);
            }
        }
    }
    Ok(rows)
}

/// CSV with header `form_id,n,sigma,analytic,numeric,rel_err`.
pub fn quadrature_csv(rows: &[QuadratureRow]) -> String {
    let mut out = String::from("form_id,n,sigma,analytic,numeric,rel_err\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}:{},{},{},{},{},{}",
            r.form_id,
            r.kind.label(),
            r.n,
            r.sigma,
            r.analytic,
            r.numeric,
            r.rel_err
        );
    }
    out
}
