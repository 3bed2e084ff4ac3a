//! Levi-Civita connection and curvature of left-invariant metrics, evaluated
//! on left-invariant vector fields (i.e. directly on algebra vectors).

use super::{ad_transpose_unchecked, bracket_unchecked, Algebra, AlgebraVector, MetricSpec};
use crate::error::{invalid, Result};

/// Bilinear connection `(ξ, η) ↦ ∇_ξ η` on a Lie algebra.
#[derive(Clone, Copy, Debug)]
pub enum LieConnection<'a> {
    /// General left-invariant metric `𝕀`.
    Invariant { algebra: Algebra, metric: &'a MetricSpec },
    /// Bi-invariant metric on a compact algebra: `∇_X Y = ½[X, Y]`.
    Compact { algebra: Algebra },
}

impl<'a> LieConnection<'a> {
    pub fn invariant(algebra: Algebra, metric: &'a MetricSpec) -> Result<Self> {
        if metric.dim() != algebra.dim() {
            return Err(invalid(format!(
                "metric of dimension {} on {algebra} (dimension {})",
                metric.dim(),
                algebra.dim()
            )));
        }
        Ok(Self::Invariant { algebra, metric })
    }

    pub fn compact(algebra: Algebra) -> Result<Self> {
        if !algebra.is_compact() {
            return Err(invalid(format!(
                "{algebra} is not a compact algebra; use the general left-invariant formulas"
            )));
        }
        Ok(Self::Compact { algebra })
    }

    pub fn algebra(&self) -> Algebra {
        match self {
            Self::Invariant { algebra, .. } | Self::Compact { algebra } => *algebra,
        }
    }

    fn check(&self, v: &AlgebraVector) -> Result<()> {
        if v.algebra() != self.algebra() {
            return Err(invalid(format!(
                "vector in {} passed to a connection on {}",
                v.algebra(),
                self.algebra()
            )));
        }
        Ok(())
    }

    /// `∇_ξ η`. Both vectors must belong to the connection's algebra.
    pub fn cov(&self, xi: &AlgebraVector, eta: &AlgebraVector) -> AlgebraVector {
        debug_assert_eq!(xi.algebra(), self.algebra());
        debug_assert_eq!(eta.algebra(), self.algebra());
        let br = bracket_unchecked(xi, eta);
        match self {
            Self::Compact { .. } => br * 0.5,
            Self::Invariant { algebra, metric } => {
                let ieta = AlgebraVector::from_raw(*algebra, metric.lower(eta.coords()));
                let ixi = AlgebraVector::from_raw(*algebra, metric.lower(xi.coords()));
                let coad = ad_transpose_unchecked(xi, &ieta) + ad_transpose_unchecked(eta, &ixi);
                let raised = AlgebraVector::from_raw(*algebra, metric.raise(coad.coords()));
                (br - raised) * 0.5
            }
        }
    }

    /// `R(X, Y) Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_[X,Y] Z`.
    pub fn curv(&self, x: &AlgebraVector, y: &AlgebraVector, z: &AlgebraVector) -> AlgebraVector {
        match self {
            Self::Compact { .. } => bracket_unchecked(&bracket_unchecked(x, y), z) * -0.25,
            Self::Invariant { .. } => {
                let a = self.cov(x, &self.cov(y, z));
                let b = self.cov(y, &self.cov(x, z));
                let c = self.cov(&bracket_unchecked(x, y), z);
                a - b - c
            }
        }
    }

    pub fn try_cov(&self, xi: &AlgebraVector, eta: &AlgebraVector) -> Result<AlgebraVector> {
        self.check(xi)?;
        self.check(eta)?;
        Ok(self.cov(xi, eta))
    }

    pub fn try_curv(
        &self,
        x: &AlgebraVector,
        y: &AlgebraVector,
        z: &AlgebraVector,
    ) -> Result<AlgebraVector> {
        self.check(x)?;
        self.check(y)?;
        self.check(z)?;
        Ok(self.curv(x, y, z))
    }
}

/// `∇_ξ η = ½([ξ,η] − 𝕀⁻¹(ad*_ξ 𝕀η + ad*_η 𝕀ξ))` for a left-invariant metric.
pub fn cov_der_invariant(
    metric: &MetricSpec,
    xi: &AlgebraVector,
    eta: &AlgebraVector,
) -> Result<AlgebraVector> {
    LieConnection::invariant(xi.algebra(), metric)?.try_cov(xi, eta)
}

/// `∇_ξ η = ½[ξ, η]`, valid only on compact algebras.
pub fn cov_der_compact(xi: &AlgebraVector, eta: &AlgebraVector) -> Result<AlgebraVector> {
    LieConnection::compact(xi.algebra())?.try_cov(xi, eta)
}

/// `R(X, Y) Z = −¼[[X, Y], Z]`, valid only on compact algebras.
pub fn curv_compact(
    x: &AlgebraVector,
    y: &AlgebraVector,
    z: &AlgebraVector,
) -> Result<AlgebraVector> {
    LieConnection::compact(x.algebra())?.try_curv(x, y, z)
}

/// Curvature of the left-invariant Levi-Civita connection of `metric`.
pub fn curv_invariant(
    metric: &MetricSpec,
    x: &AlgebraVector,
    y: &AlgebraVector,
    z: &AlgebraVector,
) -> Result<AlgebraVector> {
    LieConnection::invariant(x.algebra(), metric)?.try_curv(x, y, z)
}
