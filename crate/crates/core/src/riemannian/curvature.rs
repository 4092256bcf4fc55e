use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Curvature symbols `R_{ijkℓ}`, `Ric_{ij}` and `S` at a basepoint, expressed
/// in an orthonormal frame (the center of normal coordinates).
///
/// Sign convention: `R_{ijkℓ} = ⟨R(e_i, e_j)e_k, e_ℓ⟩` with
/// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z`, so the sectional curvature of
/// the plane `e_1 ∧ e_2` is `R_{1221}` and `Ric_{ij} = Σ_k R_{kijk}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureData {
    dimension: usize,
    riemann: Vec<f64>,
    ricci: DMatrix<f64>,
    scalar: f64,
}

impl CurvatureData {
    /// Builds the data from a full Riemann tensor, deriving Ricci and scalar
    /// curvature by contraction.
    pub fn from_riemann(dimension: usize, riemann: Vec<f64>) -> Result<Self> {
        if dimension < 2 {
            return Err(LabError::InvalidDimension(dimension));
        }
        let expected = dimension.pow(4);
        if riemann.len() != expected {
            return Err(LabError::DimensionMismatch {
                expected,
                found: riemann.len(),
            });
        }
        let n = dimension;
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        let ricci = DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| riemann[idx(k, i, j, k)]).sum());
        let scalar = ricci.trace();
        Ok(Self {
            dimension,
            riemann,
            ricci,
            scalar,
        })
    }

    pub fn flat(dimension: usize) -> Result<Self> {
        Self::from_riemann(dimension, vec![0.0; dimension.pow(4)])
    }

    /// Constant sectional curvature `k`: `R_{ijkℓ} = k(δ_{jk}δ_{iℓ} − δ_{ik}δ_{jℓ})`.
    pub fn space_form(dimension: usize, k: f64) -> Result<Self> {
        let n = dimension;
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut r = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for kk in 0..n {
                    for l in 0..n {
                        r[((i * n + j) * n + kk) * n + l] = k * (d(j, kk) * d(i, l) - d(i, kk) * d(j, l));
                    }
                }
            }
        }
        Self::from_riemann(n, r)
    }

    /// Half of the Kulkarni–Nomizu product `h ⊙ k` of two symmetric matrices,
    /// sign-adjusted to this crate's convention. Every algebraic curvature
    /// tensor is a sum of such products, so this is the generator used for
    /// randomized tests.
    pub fn kulkarni_nomizu(h: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n || k.nrows() != n || k.ncols() != n {
            return Err(LabError::DimensionMismatch {
                expected: n,
                found: k.nrows(),
            });
        }
        let mut r = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        // (h ⊙ k)_{ijab} with indices arranged so the space
                        // form arises from h = k = g with factor K/2.
                        let v = h[(j, a)] * k[(i, b)] + h[(i, b)] * k[(j, a)]
                            - h[(i, a)] * k[(j, b)]
                            - h[(j, b)] * k[(i, a)];
                        r[((i * n + j) * n + a) * n + b] = 0.5 * v;
                    }
                }
            }
        }
        Self::from_riemann(n, r)
    }

    /// Component-wise sum of two curvature tensors of the same dimension.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dimension != other.dimension {
            return Err(LabError::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        let r = self
            .riemann
            .iter()
            .zip(&other.riemann)
            .map(|(a, b)| a + b)
            .collect();
        Self::from_riemann(self.dimension, r)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dimension;
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    pub fn ricci(&self) -> &DMatrix<f64> {
        &self.ricci
    }

    pub fn scalar(&self) -> f64 {
        self.scalar
    }

    pub fn is_flat(&self) -> bool {
        self.riemann.iter().all(|&v| v == 0.0)
    }

    /// `Ric(v, v)`.
    pub fn ricci_form(&self, v: &[f64]) -> f64 {
        let n = self.dimension;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.ricci[(i, j)] * v[i] * v[j];
            }
        }
        s
    }

    /// Matrix of the quadratic form `x ↦ ⟨R(x, v)v, x⟩`, i.e.
    /// `Q_{ij} = v^k v^ℓ R_{ikℓj}`. Its trace is `Ric(v, v)`.
    pub fn sectional_form(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.dimension;
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += v[k] * v[l] * self.r(i, k, l, j);
                }
            }
            s
        })
    }

    /// Largest violation of the algebraic symmetries (antisymmetry in each
    /// pair, pair exchange, first Bianchi identity).
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dimension;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.r(i, j, k, l);
                        worst = worst
                            .max((r + self.r(j, i, k, l)).abs())
                            .max((r + self.r(i, j, l, k)).abs())
                            .max((r - self.r(k, l, i, j)).abs())
                            .max((r + self.r(j, k, i, l) + self.r(k, i, j, l)).abs());
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_symbols() {
        let c = CurvatureData::space_form(2, 1.0).unwrap();
        assert_eq!(c.r(0, 1, 1, 0), 1.0);
        assert_eq!(c.ricci()[(0, 0)], 1.0);
        assert_eq!(c.ricci()[(0, 1)], 0.0);
        assert_eq!(c.scalar(), 2.0);
        assert_eq!(c.symmetry_defect(), 0.0);
    }

    #[test]
    fn hyperbolic_three_space() {
        let c = CurvatureData::space_form(3, -1.0).unwrap();
        assert_eq!(c.scalar(), -6.0);
        assert_eq!(c.ricci()[(2, 2)], -2.0);
    }

    #[test]
    fn kulkarni_nomizu_of_metric_is_space_form() {
        let g = DMatrix::<f64>::identity(3, 3);
        let kn = CurvatureData::kulkarni_nomizu(&g, &g).unwrap();
        let sf = CurvatureData::space_form(3, 1.0).unwrap();
        for (a, b) in kn.riemann.iter().zip(&sf.riemann) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sectional_form_trace_is_ricci() {
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.1, 0.2, -0.5, 0.3, -0.1, 0.3, 0.7]);
        let k = DMatrix::from_row_slice(3, 3, &[0.4, -0.3, 0.0, -0.3, 1.1, 0.2, 0.0, 0.2, -0.9]);
        let c = CurvatureData::kulkarni_nomizu(&h, &k).unwrap();
        assert!(c.symmetry_defect() < 1e-14);
        let v = [0.6, 0.0, 0.8];
        let q = c.sectional_form(&v);
        assert!((q.trace() - c.ricci_form(&v)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_dimension() {
        assert_eq!(
            CurvatureData::flat(1).unwrap_err(),
            LabError::InvalidDimension(1)
        );
        assert!(CurvatureData::from_riemann(2, vec![0.0; 3]).is_err());
    }
}
