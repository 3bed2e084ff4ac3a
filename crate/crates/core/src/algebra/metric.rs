use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Symmetric positive-definite inner product matrix on a vector space
/// (a Lie algebra or a Euclidean base).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    inner: DMatrix<f64>,
    inverse: DMatrix<f64>,
    is_identity: bool,
}

impl MetricSpec {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        let n = inner.nrows();
        if n == 0 || inner.ncols() != n {
            return Err(invalid(format!(
                "metric must be a non-empty square matrix, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.iter().any(|x| !x.is_finite()) {
            return Err(invalid("metric has non-finite entries"));
        }
        let asym = (&inner - inner.transpose()).amax();
        if asym > 1e-12 {
            return Err(invalid(format!("metric is not symmetric (defect {asym:.3e})")));
        }
        let chol = inner
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("metric is singular or not positive definite"))?;
        let inverse = chol.inverse();
        let is_identity = inner == DMatrix::identity(n, n);
        Ok(Self {
            inner,
            inverse,
            is_identity,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
            inverse: DMatrix::identity(dim, dim),
            is_identity: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.is_identity
    }

    /// The scale `c` if the metric equals `c·I`.
    pub fn uniform_scale(&self) -> Option<f64> {
        let c = self.inner[(0, 0)];
        let n = self.dim();
        (&self.inner - DMatrix::identity(n, n) * c)
            .iter()
            .all(|x| x.abs() <= 1e-14 * c.abs())
            .then_some(c)
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        if self.is_identity {
            a.dot(b)
        } else {
            a.dot(&(&self.inner * b))
        }
    }

    /// `𝕀 v` (index lowering).
    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.is_identity {
            v.clone()
        } else {
            &self.inner * v
        }
    }

    /// `𝕀⁻¹ v` (index raising).
    pub fn raise(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.is_identity {
            v.clone()
        } else {
            &self.inverse * v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(MetricSpec::new(asym).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(MetricSpec::new(indef).is_err());
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(MetricSpec::new(singular).is_err());
    }

    #[test]
    fn inverse_and_scale() {
        let m = MetricSpec::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let prod = m.matrix() * m.inverse_matrix();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert_eq!(m.uniform_scale(), None);
        let s = MetricSpec::new(DMatrix::identity(3, 3) * 2.5).unwrap();
        assert_eq!(s.uniform_scale(), Some(2.5));
        assert!(MetricSpec::identity(4).is_identity());
    }
}
