//! Local principal connection `A(x): T_xM → 𝔤` of a principal kinematic
//! system, with the nonholonomic constraint `𝔱 = −A(x) ẋ`.
//!
//! For a compact-group base, base velocities are body velocities `ω` in
//! `so(3)^k` coordinates, so `A(R)` acts on `ω` and directional derivatives
//! are taken along `R ↦ R exp(s w)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::algebra::{exp_so3, log_so3, Algebra, AlgebraVector, GroupElement, GroupFactor, MetricSpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{BaseJet, BasePoint, CurveJet};

/// User-supplied matrix field `x ↦ A(x)` (shape `dim 𝔤 × dim M`).
pub type FieldFn = Arc<dyn Fn(&BasePoint) -> DMatrix<f64> + Send + Sync>;

/// Analytic jet of `t ↦ A(x(t)) ẋ(t)` (note: without the minus sign).
pub type JetFn = Arc<dyn Fn(&BaseJet) -> CurveJet<DVector<f64>> + Send + Sync>;

#[derive(Clone)]
pub enum ConnectionKind {
    Zero,
    Constant(DMatrix<f64>),
    Field(FieldFn),
    /// Smooth synthetic connection `SO(3)×SO(3) → se(3)`.
    PurcellTest,
}

#[derive(Clone)]
pub enum DerivativeMode {
    FiniteDifference,
    Analytic(JetFn),
}

#[derive(Clone)]
pub struct LocalConnection {
    kind: ConnectionKind,
    base_dim: usize,
    algebra: Algebra,
    mode: DerivativeMode,
}

impl fmt::Debug for LocalConnection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalConnection")
            .field("kind", &self.kind_name())
            .field("base_dim", &self.base_dim)
            .field("algebra", &self.algebra)
            .field(
                "analytic",
                &matches!(self.mode, DerivativeMode::Analytic(_)),
            )
            .finish()
    }
}

const PURCELL_W1: [f64; 6] = [0.4, -0.3, 0.2, 0.1, 0.5, -0.2];
const PURCELL_W2: [f64; 6] = [-0.2, 0.3, 0.4, -0.5, 0.1, 0.3];

fn purcell_a0(i: usize, j: usize) -> f64 {
    0.5 * (1.3 * (i + 1) as f64 + 0.7 * (j + 1) as f64).sin()
}

fn purcell_a1(i: usize, j: usize) -> f64 {
    0.2 * (0.9 * (i + 1) as f64 - 1.1 * (j + 1) as f64).cos()
}

fn purcell_a2(i: usize, j: usize) -> f64 {
    0.15 * (0.6 * (i + 1) as f64 + 1.7 * (j + 1) as f64 + 0.3).sin()
}

/// `A(z) = A₀ + A₁ sin⟨w₁, z⟩ + A₂ cos⟨w₂, z⟩` with `z = (log R₁, log R₂)`.
fn purcell_matrix(z: &[f64; 6]) -> DMatrix<f64> {
    let s1: f64 = PURCELL_W1.iter().zip(z).map(|(a, b)| a * b).sum();
    let s2: f64 = PURCELL_W2.iter().zip(z).map(|(a, b)| a * b).sum();
    let (sin1, cos2) = (s1.sin(), s2.cos());
    DMatrix::from_fn(6, 6, |i, j| {
        purcell_a0(i, j) + purcell_a1(i, j) * sin1 + purcell_a2(i, j) * cos2
    })
}

impl LocalConnection {
    pub fn zero(base_dim: usize, algebra: Algebra) -> Self {
        Self {
            kind: ConnectionKind::Zero,
            base_dim,
            algebra,
            mode: DerivativeMode::FiniteDifference,
        }
    }

    pub fn constant(matrix: DMatrix<f64>, algebra: Algebra) -> Result<Self> {
        if matrix.nrows() != algebra.dim() {
            return Err(invalid(format!(
                "connection matrix has {} rows, {algebra} has dimension {}",
                matrix.nrows(),
                algebra.dim()
            )));
        }
        if matrix.ncols() == 0 {
            return Err(invalid("connection matrix has no columns"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(invalid("connection matrix has non-finite entries"));
        }
        Ok(Self {
            base_dim: matrix.ncols(),
            kind: ConnectionKind::Constant(matrix),
            algebra,
            mode: DerivativeMode::FiniteDifference,
        })
    }

    /// Constant connection from a row-major slice.
    pub fn constant_row_major(data: &[f64], base_dim: usize, algebra: Algebra) -> Result<Self> {
        if data.len() != base_dim * algebra.dim() {
            return Err(invalid(format!(
                "connection matrix needs {}x{} = {} entries, got {}",
                algebra.dim(),
                base_dim,
                base_dim * algebra.dim(),
                data.len()
            )));
        }
        Self::constant(DMatrix::from_row_slice(algebra.dim(), base_dim, data), algebra)
    }

    pub fn field(base_dim: usize, algebra: Algebra, f: FieldFn) -> Self {
        Self {
            kind: ConnectionKind::Field(f),
            base_dim,
            algebra,
            mode: DerivativeMode::FiniteDifference,
        }
    }

    /// The synthetic swimmer connection on `SO(3)×SO(3)` with values in se(3).
    pub fn purcell_test() -> Self {
        Self {
            kind: ConnectionKind::PurcellTest,
            base_dim: 6,
            algebra: Algebra::se3(),
            mode: DerivativeMode::FiniteDifference,
        }
    }

    /// Registers an analytic jet of `A(x(t)) ẋ(t)`, used instead of finite differences.
    pub fn with_analytic_jet(mut self, jet: JetFn) -> Self {
        self.mode = DerivativeMode::Analytic(jet);
        self
    }

    pub fn kind(&self) -> &ConnectionKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ConnectionKind::Zero => "zero",
            ConnectionKind::Constant(_) => "constant",
            ConnectionKind::Field(_) => "field",
            ConnectionKind::PurcellTest => "builtin:purcell_test",
        }
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ConnectionKind::Zero)
    }

    /// True when `A` does not depend on `x`.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, ConnectionKind::Zero | ConnectionKind::Constant(_))
    }

    pub(crate) fn check_point(&self, x: &BasePoint) -> Result<()> {
        match x {
            BasePoint::Euclidean(v) if v.len() == self.base_dim => Ok(()),
            BasePoint::Group(g)
                if 3 * g.factors().len() == self.base_dim
                    && g.factors().iter().all(|f| matches!(f, GroupFactor::So3(_))) =>
            {
                Ok(())
            }
            _ => Err(invalid(format!(
                "base point does not match a connection on a {}-dimensional base",
                self.base_dim
            ))),
        }
    }

    fn check_vector(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.base_dim {
            return Err(invalid(format!(
                "{what}: base vector has {} entries, connection expects {}",
                v.len(),
                self.base_dim
            )));
        }
        Ok(())
    }

    /// `A(x)`.
    pub fn eval(&self, x: &BasePoint) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &BasePoint) -> Result<DMatrix<f64>> {
        match &self.kind {
            ConnectionKind::Zero => Ok(DMatrix::zeros(self.algebra.dim(), self.base_dim)),
            ConnectionKind::Constant(a) => Ok(a.clone()),
            ConnectionKind::Field(f) => {
                let a = f(x);
                if a.nrows() != self.algebra.dim() || a.ncols() != self.base_dim {
                    return Err(invalid(format!(
                        "connection field returned a {}x{} matrix, expected {}x{}",
                        a.nrows(),
                        a.ncols(),
                        self.algebra.dim(),
                        self.base_dim
                    )));
                }
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!(
                        "connection field is not finite at {:?}",
                        x.coords()
                    )));
                }
                Ok(a)
            }
            ConnectionKind::PurcellTest => {
                let BasePoint::Group(g) = x else {
                    return Err(invalid("builtin:purcell_test needs an SO(3)xSO(3) base point"));
                };
                let mut z = [0.0; 6];
                for (i, f) in g.factors().iter().enumerate() {
                    let w = log_so3(&f.rotation())?;
                    z[3 * i..3 * i + 3].copy_from_slice(w.as_slice());
                }
                Ok(purcell_matrix(&z))
            }
        }
    }

    /// `x` moved by `s·w`: additively, or by `R exp(s w)` on a group base.
    fn displace(x: &BasePoint, w: &DVector<f64>, s: f64) -> BasePoint {
        match x {
            BasePoint::Euclidean(v) => BasePoint::Euclidean(v + w * s),
            BasePoint::Group(g) => {
                let factors = g
                    .factors()
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let d = Vector3::new(w[3 * i], w[3 * i + 1], w[3 * i + 2]) * s;
                        GroupFactor::So3(f.rotation() * exp_so3(&d))
                    })
                    .collect();
                BasePoint::Group(GroupElement::from_factors_unchecked(factors))
            }
        }
    }

    /// `d/ds A(x ⊕ s w)` at `s = 0`, by a fourth-order central difference.
    pub fn directional_derivative(&self, x: &BasePoint, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        self.check_vector(w, "directional_derivative")?;
        self.directional_derivative_unchecked(x, w)
    }

    fn directional_derivative_unchecked(
        &self,
        x: &BasePoint,
        w: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        if self.is_constant() {
            return Ok(DMatrix::zeros(self.algebra.dim(), self.base_dim));
        }
        let norm = w.amax();
        if norm == 0.0 {
            return Ok(DMatrix::zeros(self.algebra.dim(), self.base_dim));
        }
        let h = 1e-3 / norm;
        let a = |s: f64| self.eval_unchecked(&Self::displace(x, w, s));
        let (m2, m1, p1, p2) = (a(-2.0 * h)?, a(-h)?, a(h)?, a(2.0 * h)?);
        Ok((m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h))
    }

    /// `∂A[e_j]` for every base coordinate direction `e_j`.
    pub fn coordinate_derivatives(&self, x: &BasePoint) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        (0..self.base_dim)
            .map(|j| {
                let mut e = DVector::zeros(self.base_dim);
                e[j] = 1.0;
                self.directional_derivative_unchecked(x, &e)
            })
            .collect()
    }
}

/// `ξ = −A(x) ẋ`.
pub fn constrained_velocity(
    conn: &LocalConnection,
    x: &BasePoint,
    xdot: &DVector<f64>,
) -> Result<AlgebraVector> {
    conn.check_vector(xdot, "constrained_velocity")?;
    let a = conn.eval(x)?;
    Ok(AlgebraVector::from_raw(conn.algebra, -(a * xdot)))
}

/// Metric adjoint of a connection matrix: `G_M⁻¹ Aᵀ G_𝔤 μ`.
pub fn adjoint_matrix_apply(
    a: &DMatrix<f64>,
    base_metric: &MetricSpec,
    group_metric: &MetricSpec,
    mu: &DVector<f64>,
) -> DVector<f64> {
    base_metric.raise(&a.tr_mul(&group_metric.lower(mu)))
}

/// The unique `v` with `⟨A(x) w, μ⟩_𝔤 = ⟨w, v⟩_M` for all `w`.
pub fn adjoint_apply(
    conn: &LocalConnection,
    base_metric: &MetricSpec,
    group_metric: &MetricSpec,
    x: &BasePoint,
    mu: &AlgebraVector,
) -> Result<DVector<f64>> {
    if base_metric.dim() != conn.base_dim || group_metric.dim() != conn.algebra.dim() {
        return Err(invalid("adjoint_apply: metric dimensions do not match the connection"));
    }
    if mu.algebra() != conn.algebra {
        return Err(invalid(format!(
            "adjoint_apply: expected a {} vector, got {}",
            conn.algebra,
            mu.algebra()
        )));
    }
    let a = conn.eval(x)?;
    Ok(adjoint_matrix_apply(&a, base_metric, group_metric, mu.coords()))
}

/// `(𝔱, 𝔱̇, 𝔱̈, 𝔱⃛)` of `𝔱(t) = −A(x(t)) ẋ(t)` at the jet's time.
///
/// Without an analytic jet, derivatives are central differences in time of
/// the composed map along the jet's Taylor polynomial with step `h_fd`
/// (five points for the first two derivatives, seven for the third).
pub fn connection_jet(
    conn: &LocalConnection,
    jet: &BaseJet,
    h_fd: f64,
) -> Result<CurveJet<AlgebraVector>> {
    if jet.dim() != conn.base_dim {
        return Err(invalid(format!(
            "connection_jet: base jet has dimension {}, connection expects {}",
            jet.dim(),
            conn.base_dim
        )));
    }
    if !(h_fd > 0.0) {
        return Err(invalid("connection_jet: step must be positive"));
    }
    let alg = conn.algebra;
    let wrap = |v: DVector<f64>| AlgebraVector::from_raw(alg, -v);
    if let DerivativeMode::Analytic(f) = &conn.mode {
        let j = f(jet);
        return Ok(CurveJet::new(wrap(j.value), wrap(j.d1), wrap(j.d2), wrap(j.d3)));
    }
    match &conn.kind {
        ConnectionKind::Zero => return Ok(CurveJet::<AlgebraVector>::zeros(alg)),
        ConnectionKind::Constant(a) => {
            let v = jet.velocity_jet();
            return Ok(CurveJet::new(
                wrap(a * v.value),
                wrap(a * v.d1),
                wrap(a * v.d2),
                wrap(a * v.d3),
            ));
        }
        _ => {}
    }
    let mut f = Vec::with_capacity(7);
    for k in -3..=3 {
        let (p, v) = jet.sample(k as f64 * h_fd);
        f.push(conn.eval_unchecked(&p)? * v);
    }
    let h = h_fd;
    let d1 = (&f[1] - &f[2] * 8.0 + &f[4] * 8.0 - &f[5]) / (12.0 * h);
    let d2 = (-&f[1] + &f[2] * 16.0 - &f[3] * 30.0 + &f[4] * 16.0 - &f[5]) / (12.0 * h * h);
    let d3 = (&f[0] - &f[1] * 8.0 + &f[2] * 13.0 - &f[4] * 13.0 + &f[5] * 8.0 - &f[6])
        / (8.0 * h * h * h);
    let value = f.swap_remove(3);
    Ok(CurveJet::new(wrap(value), wrap(d1), wrap(d2), wrap(d3)))
}
