//! Curve-level Riemannian calculus on the product bundle `Q = M × G`.
//!
//! Group-valued curves are always handled through their body velocity
//! `𝔱 = g⁻¹ġ` and its time derivatives. The base is either Euclidean `ℝⁿ`
//! or a product of SO(3) factors with a bi-invariant metric; in the latter
//! case base "vectors" are body velocities in `so(3)^k` coordinates and
//! base points are reached through per-segment exponential charts.

use nalgebra::{DVector, Vector3};

use crate::algebra::taylor::so3_body_velocity_jet;
use crate::algebra::{
    exp_so3, right_jacobian_so3, Algebra, AlgebraVector, GroupElement, GroupFactor,
    LieConnection, MetricSpec,
};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    /// `ℝⁿ` with a constant metric.
    Euclidean(usize),
    /// `SO(3)^k` with a bi-invariant metric.
    CompactGroup(usize),
}

impl BaseKind {
    pub fn dim(&self) -> usize {
        match self {
            BaseKind::Euclidean(n) => *n,
            BaseKind::CompactGroup(k) => 3 * k,
        }
    }
}

/// The bundle `(Q, π, M, G)` together with the two metrics of the product metric.
#[derive(Clone, Debug)]
pub struct BundleSpec {
    base: BaseKind,
    group: Algebra,
    base_metric: MetricSpec,
    group_metric: MetricSpec,
}

impl BundleSpec {
    pub fn new(
        base: BaseKind,
        group: Algebra,
        base_metric: MetricSpec,
        group_metric: MetricSpec,
    ) -> Result<Self> {
        if base.dim() == 0 {
            return Err(invalid("base must have positive dimension"));
        }
        if base_metric.dim() != base.dim() {
            return Err(invalid(format!(
                "base metric has dimension {}, base has dimension {}",
                base_metric.dim(),
                base.dim()
            )));
        }
        if group_metric.dim() != group.dim() {
            return Err(invalid(format!(
                "group metric has dimension {}, {group} has dimension {}",
                group_metric.dim(),
                group.dim()
            )));
        }
        if let BaseKind::CompactGroup(k) = base {
            Algebra::so3_power(k)?;
            if base_metric.uniform_scale().is_none() {
                return Err(invalid(
                    "a compact-group base needs a bi-invariant metric (a multiple of the identity)",
                ));
            }
        }
        Ok(Self {
            base,
            group,
            base_metric,
            group_metric,
        })
    }

    /// Identity metrics on both factors.
    pub fn with_identity_metrics(base: BaseKind, group: Algebra) -> Result<Self> {
        Self::new(
            base,
            group,
            MetricSpec::identity(base.dim()),
            MetricSpec::identity(group.dim()),
        )
    }

    pub fn base(&self) -> BaseKind {
        self.base
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn group(&self) -> Algebra {
        self.group
    }

    pub fn base_metric(&self) -> &MetricSpec {
        &self.base_metric
    }

    pub fn group_metric(&self) -> &MetricSpec {
        &self.group_metric
    }

    /// Algebra of the base when the base is a compact group.
    pub fn base_algebra(&self) -> Option<Algebra> {
        match self.base {
            BaseKind::CompactGroup(k) => Some(Algebra::so3_power(k).expect("validated")),
            BaseKind::Euclidean(_) => None,
        }
    }

    pub fn group_connection(&self) -> LieConnection<'_> {
        LieConnection::Invariant {
            algebra: self.group,
            metric: &self.group_metric,
        }
    }

    pub(crate) fn check_base_vector(&self, v: &DVector<f64>, what: &str) -> Result<()> {
        if v.len() != self.base_dim() {
            return Err(invalid(format!(
                "{what}: base vector has {} entries, base dimension is {}",
                v.len(),
                self.base_dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_group_vector(&self, v: &AlgebraVector, what: &str) -> Result<()> {
        if v.algebra() != self.group {
            return Err(invalid(format!(
                "{what}: expected a {} vector, got {}",
                self.group,
                v.algebra()
            )));
        }
        Ok(())
    }
}

/// A point of the base manifold.
#[derive(Clone, Debug, PartialEq)]
pub enum BasePoint {
    Euclidean(DVector<f64>),
    Group(GroupElement),
}

impl BasePoint {
    /// Flat coordinates: the vector itself, or row-major rotation matrices.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            BasePoint::Euclidean(x) => x.iter().copied().collect(),
            BasePoint::Group(g) => g.to_row_major(),
        }
    }
}

/// Value and first three time derivatives of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveJet<V> {
    pub value: V,
    pub d1: V,
    pub d2: V,
    pub d3: V,
}

impl<V> CurveJet<V> {
    pub fn new(value: V, d1: V, d2: V, d3: V) -> Self {
        Self { value, d1, d2, d3 }
    }

    pub fn map<W>(&self, f: impl Fn(&V) -> W) -> CurveJet<W> {
        CurveJet {
            value: f(&self.value),
            d1: f(&self.d1),
            d2: f(&self.d2),
            d3: f(&self.d3),
        }
    }
}

impl CurveJet<AlgebraVector> {
    pub fn zeros(algebra: Algebra) -> Self {
        let z = AlgebraVector::zeros(algebra);
        Self::new(z.clone(), z.clone(), z.clone(), z)
    }
}

impl CurveJet<DVector<f64>> {
    pub fn zeros(dim: usize) -> Self {
        let z = DVector::zeros(dim);
        Self::new(z.clone(), z.clone(), z.clone(), z)
    }
}

/// Position-level jet of a base curve through the fourth derivative.
///
/// For a compact-group base the coordinates are exponential coordinates
/// `φ` in the chart `R = anchor · exp(φ)` (one SO(3) block per factor).
#[derive(Clone, Debug)]
pub enum BaseJet {
    Euclidean {
        derivs: [DVector<f64>; 5],
    },
    Chart {
        anchor: GroupElement,
        derivs: [DVector<f64>; 5],
    },
}

impl BaseJet {
    pub fn derivs(&self) -> &[DVector<f64>; 5] {
        match self {
            BaseJet::Euclidean { derivs } | BaseJet::Chart { derivs, .. } => derivs,
        }
    }

    pub fn dim(&self) -> usize {
        self.derivs()[0].len()
    }

    /// Coordinates of the curve at offset `tau` from the jet's time.
    fn coords_at(&self, tau: f64) -> (DVector<f64>, DVector<f64>) {
        let d = self.derivs();
        let t2 = tau * tau / 2.0;
        let t3 = tau * t2 / 3.0;
        let t4 = tau * t3 / 4.0;
        let x = &d[0] + &d[1] * tau + &d[2] * t2 + &d[3] * t3 + &d[4] * t4;
        let v = &d[1] + &d[2] * tau + &d[3] * t2 + &d[4] * t3;
        (x, v)
    }

    pub fn point(&self) -> BasePoint {
        match self {
            BaseJet::Euclidean { derivs } => BasePoint::Euclidean(derivs[0].clone()),
            BaseJet::Chart { anchor, derivs } => BasePoint::Group(chart_point(anchor, &derivs[0])),
        }
    }

    /// Base point and base velocity (body velocity for a group base) of the
    /// Taylor polynomial at offset `tau`.
    pub fn sample(&self, tau: f64) -> (BasePoint, DVector<f64>) {
        let (x, v) = self.coords_at(tau);
        match self {
            BaseJet::Euclidean { .. } => (BasePoint::Euclidean(x), v),
            BaseJet::Chart { anchor, .. } => {
                let omega = chart_velocity(&x, &v);
                (BasePoint::Group(chart_point(anchor, &x)), omega)
            }
        }
    }

    /// Exact jet `(ẋ, ẍ, x⃛, x⁗)`, or `(ω, ω̇, ω̈, ω⃛)` for a group base.
    pub fn velocity_jet(&self) -> CurveJet<DVector<f64>> {
        match self {
            BaseJet::Euclidean { derivs } => CurveJet::new(
                derivs[1].clone(),
                derivs[2].clone(),
                derivs[3].clone(),
                derivs[4].clone(),
            ),
            BaseJet::Chart { derivs, .. } => {
                let n = derivs[0].len();
                let mut out = CurveJet::<DVector<f64>>::zeros(n);
                for off in (0..n).step_by(3) {
                    let phi = derivs
                        .clone()
                        .map(|d| Vector3::new(d[off], d[off + 1], d[off + 2]));
                    let w = so3_body_velocity_jet(&phi);
                    out.value.fixed_rows_mut::<3>(off).copy_from(&w[0]);
                    out.d1.fixed_rows_mut::<3>(off).copy_from(&w[1]);
                    out.d2.fixed_rows_mut::<3>(off).copy_from(&w[2]);
                    out.d3.fixed_rows_mut::<3>(off).copy_from(&w[3]);
                }
                out
            }
        }
    }
}

/// `anchor · exp(φ)` factor by factor.
pub fn chart_point(anchor: &GroupElement, phi: &DVector<f64>) -> GroupElement {
    let factors = anchor
        .factors()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let w = Vector3::new(phi[3 * i], phi[3 * i + 1], phi[3 * i + 2]);
            GroupFactor::So3(f.rotation() * exp_so3(&w))
        })
        .collect();
    GroupElement::from_factors_unchecked(factors)
}

/// Body velocity `J_r(φ) φ̇` for each SO(3) block.
pub fn chart_velocity(phi: &DVector<f64>, dphi: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(phi.len());
    for off in (0..phi.len()).step_by(3) {
        let p = Vector3::new(phi[off], phi[off + 1], phi[off + 2]);
        let d = Vector3::new(dphi[off], dphi[off + 1], dphi[off + 2]);
        out.fixed_rows_mut::<3>(off)
            .copy_from(&(right_jacobian_so3(&p) * d));
    }
    out
}

/// `⟨ẋ₁, ẋ₂⟩_M + ⟨𝔱₁, 𝔱₂⟩_𝔤`.
pub fn product_inner(
    spec: &BundleSpec,
    v1: (&DVector<f64>, &AlgebraVector),
    v2: (&DVector<f64>, &AlgebraVector),
) -> Result<f64> {
    spec.check_base_vector(v1.0, "product_inner")?;
    spec.check_base_vector(v2.0, "product_inner")?;
    spec.check_group_vector(v1.1, "product_inner")?;
    spec.check_group_vector(v2.1, "product_inner")?;
    Ok(spec.base_metric.inner(v1.0, v2.0) + spec.group_metric.inner(v1.1.coords(), v2.1.coords()))
}

/// Covariant acceleration `∇_q̇ q̇`, split factor-wise.
///
/// `base` is the base velocity jet (`ẋ, ẍ, …` or `ω, ω̇, …`); only its value
/// and first derivative are used. `group` is the body-velocity jet of the
/// group curve.
pub fn covariant_acceleration(
    spec: &BundleSpec,
    base: &CurveJet<DVector<f64>>,
    group: &CurveJet<AlgebraVector>,
) -> Result<(DVector<f64>, AlgebraVector)> {
    spec.check_base_vector(&base.value, "covariant_acceleration")?;
    spec.check_base_vector(&base.d1, "covariant_acceleration")?;
    spec.check_group_vector(&group.value, "covariant_acceleration")?;
    spec.check_group_vector(&group.d1, "covariant_acceleration")?;
    Ok(covariant_acceleration_unchecked(spec, base, group))
}

pub(crate) fn covariant_acceleration_unchecked(
    spec: &BundleSpec,
    base: &CurveJet<DVector<f64>>,
    group: &CurveJet<AlgebraVector>,
) -> (DVector<f64>, AlgebraVector) {
    // Bi-invariant base: ∇_ω ω = ½[ω, ω] = 0, so the base part is ω̇ either way.
    let base_acc = base.d1.clone();
    let conn = spec.group_connection();
    let group_acc = &group.d1 + &conn.cov(&group.value, &group.value);
    (base_acc, group_acc)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Quadrature {
    /// Composite Simpson; falls back to the trapezoid rule for even node counts.
    #[default]
    Simpson,
    Trapezoid,
}

/// Uniformly sampled jets on one segment `[start, start + step·(n−1)]`.
#[derive(Clone, Debug)]
pub struct SampledSegment {
    pub step: f64,
    pub base: Vec<CurveJet<DVector<f64>>>,
    pub group: Vec<CurveJet<AlgebraVector>>,
}

pub(crate) fn integrate_uniform(values: &[f64], step: f64, rule: Quadrature) -> f64 {
    let n = values.len();
    let simpson = rule == Quadrature::Simpson && n % 2 == 1;
    if simpson {
        let inner: f64 = values[1..n - 1]
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
            .sum();
        step / 3.0 * (values[0] + inner + values[n - 1])
    } else {
        let inner: f64 = values[1..n - 1].iter().sum();
        step * (0.5 * (values[0] + values[n - 1]) + inner)
    }
}

/// `𝒥 = ½ ∫ ⟨∇_q̇ q̇, ∇_q̇ q̇⟩_Q dt`, segment by segment.
pub fn cost_functional(
    spec: &BundleSpec,
    segments: &[SampledSegment],
    rule: Quadrature,
) -> Result<f64> {
    let mut total = 0.0;
    for (k, seg) in segments.iter().enumerate() {
        if seg.base.len() != seg.group.len() {
            return Err(invalid(format!(
                "segment {k}: {} base samples but {} group samples",
                seg.base.len(),
                seg.group.len()
            )));
        }
        if seg.base.len() < 3 {
            return Err(invalid(format!(
                "segment {k}: need at least 3 nodes for quadrature, got {}",
                seg.base.len()
            )));
        }
        if !(seg.step > 0.0) {
            return Err(invalid(format!("segment {k}: step must be positive")));
        }
        let mut integrand = Vec::with_capacity(seg.base.len());
        for (b, g) in seg.base.iter().zip(&seg.group) {
            let (ab, ag) = covariant_acceleration(spec, b, g)?;
            integrand.push(product_inner(spec, (&ab, &ag), (&ab, &ag))?);
        }
        total += 0.5 * integrate_uniform(&integrand, seg.step, rule);
    }
    Ok(total)
}

/// Euler–Lagrange expression of the group part of the cost in body
/// coordinates:
///
/// `𝔱⃛ + 3∇_𝔱𝔱̈ + 3∇_𝔱̇𝔱̇ + ∇_𝔱̈𝔱 + 3∇²_𝔱𝔱̇ + 2∇_𝔱∇_𝔱̇𝔱 + ∇_𝔱̇∇_𝔱𝔱 + ∇³_𝔱𝔱
///  + R(𝔱̇,𝔱)𝔱 + R(∇_𝔱𝔱,𝔱)𝔱`
pub fn elastic_group_with(conn: &LieConnection<'_>, jet: &CurveJet<AlgebraVector>) -> AlgebraVector {
    let t = &jet.value;
    let t1 = &jet.d1;
    let t2 = &jet.d2;
    let t3 = &jet.d3;
    let cov = |a: &AlgebraVector, b: &AlgebraVector| conn.cov(a, b);

    let nabla_t_t = cov(t, t);
    let nabla_t_t1 = cov(t, t1);
    let nabla_t1_t = cov(t1, t);

    let mut out = t3.clone();
    out += cov(t, t2) * 3.0;
    out += cov(t1, t1) * 3.0;
    out += cov(t2, t);
    out += cov(t, &nabla_t_t1) * 3.0;
    out += cov(t, &nabla_t1_t) * 2.0;
    out += cov(t1, &nabla_t_t);
    out += cov(t, &cov(t, &nabla_t_t));
    out += conn.curv(t1, t, t);
    out += conn.curv(&nabla_t_t, t, t);
    out
}

/// [`elastic_group_with`] for the left-invariant metric `metric`.
pub fn elastic_group(metric: &MetricSpec, jet: &CurveJet<AlgebraVector>) -> Result<AlgebraVector> {
    let algebra = jet.value.algebra();
    for v in [&jet.d1, &jet.d2, &jet.d3] {
        if v.algebra() != algebra {
            return Err(invalid("elastic_group: jet entries live in different algebras"));
        }
    }
    let conn = LieConnection::invariant(algebra, metric)?;
    Ok(elastic_group_with(&conn, jet))
}

/// Base Euler–Lagrange term `∇³_ẋ ẋ + R_M(∇_ẋ ẋ, ẋ) ẋ`.
///
/// `jet` is the base velocity jet. Euclidean: `x⁗`. Compact group: the
/// group expression with the bi-invariant formulas, which reduces to
/// `ω⃛ − ω̈ × ω` per factor.
pub fn elastic_base(spec: &BundleSpec, jet: &CurveJet<DVector<f64>>) -> Result<DVector<f64>> {
    for v in [&jet.value, &jet.d1, &jet.d2, &jet.d3] {
        spec.check_base_vector(v, "elastic_base")?;
    }
    Ok(elastic_base_unchecked(spec, jet))
}

pub(crate) fn elastic_base_unchecked(spec: &BundleSpec, jet: &CurveJet<DVector<f64>>) -> DVector<f64> {
    match spec.base_algebra() {
        None => jet.d3.clone(),
        Some(algebra) => {
            let conn = LieConnection::Compact { algebra };
            let ajet = jet.map(|v| AlgebraVector::from_raw(algebra, v.clone()));
            elastic_group_with(&conn, &ajet).into_coords()
        }
    }
}
