use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};

use super::{Algebra, AlgebraVector, FactorKind};
use crate::error::{invalid, Error, Result};

/// Largest rotation angle accepted by the logarithm.
pub const LOG_ANGLE_LIMIT: f64 = PI - 1e-6;

const ORTHO_TOL: f64 = 1e-10;
const SKEW_TOL: f64 = 1e-10;

pub fn hat3(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee3(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Skew matrix of an so(3) vector.
pub fn hat(v: &AlgebraVector) -> Result<Matrix3<f64>> {
    if v.algebra() != Algebra::so3() {
        return Err(invalid(format!("hat expects so3, got {}", v.algebra())));
    }
    Ok(hat3(&v.block3(0)))
}

/// Inverse of [`hat`]; rejects matrices that are not skew within 1e-10.
pub fn vee(m: &Matrix3<f64>) -> Result<AlgebraVector> {
    let defect = (m + m.transpose()).norm();
    if !(defect <= SKEW_TOL) {
        return Err(invalid(format!("vee of a non-skew matrix (|m + mᵀ| = {defect:.3e})")));
    }
    Ok(AlgebraVector::so3(vee3(m)))
}

/// `(1 − cos θ)/θ²` and `(θ − sin θ)/θ³`, with series near zero.
fn rodrigues_coeffs(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    if theta < 1e-2 {
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let half_sin = (0.5 * theta).sin();
        (2.0 * half_sin * half_sin / t2, (theta - theta.sin()) / (t2 * theta))
    }
}

pub fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = hat3(w);
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        let half_sin = (0.5 * theta).sin();
        (theta.sin() / theta, 2.0 * half_sin * half_sin / (theta * theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector of `r`. Fails when the angle exceeds [`LOG_ANGLE_LIMIT`].
pub fn log_so3(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let s = vee3(&(r - r.transpose())) * 0.5;
    let sin_t = s.norm();
    let cos_t = 0.5 * (r.trace() - 1.0);
    let theta = sin_t.atan2(cos_t);
    if theta > LOG_ANGLE_LIMIT {
        return Err(Error::Domain(format!(
            "rotation angle {theta:.9} is outside the logarithm's injectivity radius for {r:?}"
        )));
    }
    if theta < 1e-4 {
        let t2 = theta * theta;
        return Ok(s * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if cos_t > -0.9 {
        return Ok(s * (theta / sin_t));
    }
    // Near π the antisymmetric part is tiny; read the axis off the symmetric part.
    let one_minus_cos = 1.0 - cos_t;
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_t;
    let i = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let ki = (b[(i, i)] / one_minus_cos).sqrt();
    let mut axis: Vector3<f64> = b.column(i).into_owned() / (one_minus_cos * ki);
    axis /= axis.norm();
    if axis.dot(&s) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Right Jacobian of SO(3): `exp(φ)⁻¹ d/dt exp(φ) = (J_r(φ) φ̇)^`.
pub fn right_jacobian_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    let (b, c) = rodrigues_coeffs(phi.norm());
    let k = hat3(phi);
    Matrix3::identity() - k * b + k * k * c
}

pub fn exp_se3(w: &Vector3<f64>, v: &Vector3<f64>) -> Matrix4<f64> {
    let r = exp_so3(w);
    let (b, c) = rodrigues_coeffs(w.norm());
    let k = hat3(w);
    let jl = Matrix3::identity() + k * b + k * k * c;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(jl * v));
    m
}

pub fn log_se3(m: &Matrix4<f64>) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
    let w = log_so3(&r)?;
    let theta = w.norm();
    let d = if theta < 1e-2 {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let half_sin = (0.5 * theta).sin();
        (1.0 - theta * theta.sin() / (4.0 * half_sin * half_sin)) / (theta * theta)
    };
    let k = hat3(&w);
    let jl_inv = Matrix3::identity() - k * 0.5 + k * k * d;
    Ok((w, jl_inv * t))
}

/// One factor of a (product) group element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupFactor {
    So3(Matrix3<f64>),
    Se3(Matrix4<f64>),
}

impl GroupFactor {
    pub fn kind(&self) -> FactorKind {
        match self {
            GroupFactor::So3(_) => FactorKind::So3,
            GroupFactor::Se3(_) => FactorKind::Se3,
        }
    }

    pub fn identity(kind: FactorKind) -> Self {
        match kind {
            FactorKind::So3 => GroupFactor::So3(Matrix3::identity()),
            FactorKind::Se3 => GroupFactor::Se3(Matrix4::identity()),
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        match self {
            GroupFactor::So3(r) => *r,
            GroupFactor::Se3(m) => m.fixed_view::<3, 3>(0, 0).into_owned(),
        }
    }

    fn check(&self) -> Result<()> {
        let r = self.rotation();
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        let det = r.determinant();
        if !(ortho <= ORTHO_TOL) || !((det - 1.0).abs() <= ORTHO_TOL) {
            return Err(invalid(format!(
                "rotation block is not in SO(3) (|RᵀR − I| = {ortho:.3e}, det = {det})"
            )));
        }
        if let GroupFactor::Se3(m) = self {
            if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
                return Err(invalid("SE(3) bottom row must be exactly (0, 0, 0, 1)"));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(invalid("non-finite SE(3) entry"));
            }
        }
        Ok(())
    }

    fn compose(&self, other: &Self) -> Self {
        match (self, other) {
            (GroupFactor::So3(a), GroupFactor::So3(b)) => GroupFactor::So3(a * b),
            (GroupFactor::Se3(a), GroupFactor::Se3(b)) => {
                let mut m = a * b;
                m.fixed_view_mut::<1, 4>(3, 0)
                    .copy_from_slice(&[0.0, 0.0, 0.0, 1.0]);
                GroupFactor::Se3(m)
            }
            _ => panic!("composing group factors of different kinds"),
        }
    }

    fn inverse(&self) -> Self {
        match self {
            GroupFactor::So3(r) => GroupFactor::So3(r.transpose()),
            GroupFactor::Se3(m) => {
                let rt = m.fixed_view::<3, 3>(0, 0).transpose();
                let t = m.fixed_view::<3, 1>(0, 3);
                let mut out = Matrix4::identity();
                out.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
                out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-rt * t));
                GroupFactor::Se3(out)
            }
        }
    }

    fn reproject(&self) -> Self {
        let polar = |r: Matrix3<f64>| {
            let svd = r.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut q = u * vt;
            if q.determinant() < 0.0 {
                let mut u = u;
                u.column_mut(2).neg_mut();
                q = u * vt;
            }
            q
        };
        match self {
            GroupFactor::So3(r) => GroupFactor::So3(polar(*r)),
            GroupFactor::Se3(m) => {
                let mut out = *m;
                out.fixed_view_mut::<3, 3>(0, 0)
                    .copy_from(&polar(m.fixed_view::<3, 3>(0, 0).into_owned()));
                GroupFactor::Se3(out)
            }
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        match self {
            GroupFactor::So3(r) => DMatrix::from_iterator(3, 3, r.iter().copied()),
            GroupFactor::Se3(m) => DMatrix::from_iterator(4, 4, m.iter().copied()),
        }
    }
}

/// Element of SO(3), SE(3) or a finite product, stored as matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    factors: Vec<GroupFactor>,
}

impl GroupElement {
    pub fn identity(algebra: Algebra) -> Self {
        Self {
            factors: algebra
                .factors()
                .iter()
                .map(|&k| GroupFactor::identity(k))
                .collect(),
        }
    }

    pub fn new(factors: Vec<GroupFactor>) -> Result<Self> {
        if factors.is_empty() || factors.len() > super::MAX_FACTORS {
            return Err(invalid("group element needs between 1 and 8 factors"));
        }
        for f in &factors {
            f.check()?;
        }
        Ok(Self { factors })
    }

    pub fn so3(r: Matrix3<f64>) -> Result<Self> {
        Self::new(vec![GroupFactor::So3(r)])
    }

    pub fn se3(m: Matrix4<f64>) -> Result<Self> {
        Self::new(vec![GroupFactor::Se3(m)])
    }

    pub(crate) fn from_factors_unchecked(factors: Vec<GroupFactor>) -> Self {
        Self { factors }
    }

    /// Reads factors from concatenated row-major matrix entries.
    pub fn from_row_major(algebra: Algebra, data: &[f64]) -> Result<Self> {
        let expected: usize = algebra
            .factors()
            .iter()
            .map(|k| k.matrix_dim() * k.matrix_dim())
            .sum();
        if data.len() != expected {
            return Err(invalid(format!(
                "{algebra} group element needs {expected} matrix entries, got {}",
                data.len()
            )));
        }
        let mut factors = Vec::new();
        let mut off = 0;
        for &kind in algebra.factors() {
            let d = kind.matrix_dim();
            let block = &data[off..off + d * d];
            off += d * d;
            factors.push(match kind {
                FactorKind::So3 => GroupFactor::So3(Matrix3::from_row_slice(block)),
                FactorKind::Se3 => GroupFactor::Se3(Matrix4::from_row_slice(block)),
            });
        }
        Self::new(factors)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in &self.factors {
            match f {
                GroupFactor::So3(r) => out.extend(r.transpose().iter()),
                GroupFactor::Se3(m) => out.extend(m.transpose().iter()),
            }
        }
        out
    }

    pub fn factors(&self) -> &[GroupFactor] {
        &self.factors
    }

    pub fn algebra(&self) -> Algebra {
        let kinds: Vec<FactorKind> = self.factors.iter().map(|f| f.kind()).collect();
        Algebra::product(&kinds).expect("factor count checked at construction")
    }

    /// Block-diagonal matrix representative.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n: usize = self.factors.iter().map(|f| f.kind().matrix_dim()).sum();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for f in &self.factors {
            let m = f.matrix();
            let d = m.nrows();
            out.view_mut((off, off), (d, d)).copy_from(&m);
            off += d;
        }
        out
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.algebra() != other.algebra() {
            return Err(invalid(format!(
                "composing elements of {} and {}",
                self.algebra(),
                other.algebra()
            )));
        }
        Ok(self * other)
    }

    pub fn inverse(&self) -> Self {
        Self {
            factors: self.factors.iter().map(GroupFactor::inverse).collect(),
        }
    }

    /// Projects each rotation block back onto SO(3) by polar decomposition.
    pub fn reproject(&self) -> Self {
        Self {
            factors: self.factors.iter().map(GroupFactor::reproject).collect(),
        }
    }

    /// Largest violation of the manifold invariants.
    pub fn invariant_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let r = f.rotation();
                let ortho = (r.transpose() * r - Matrix3::identity()).amax();
                ortho.max((r.determinant() - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }
}

impl std::ops::Mul<&GroupElement> for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        assert_eq!(self.factors.len(), rhs.factors.len());
        GroupElement {
            factors: self
                .factors
                .iter()
                .zip(&rhs.factors)
                .map(|(a, b)| a.compose(b))
                .collect(),
        }
    }
}

/// Group exponential, factor by factor (Rodrigues / closed-form SE(3)).
pub fn exp_group(v: &AlgebraVector) -> GroupElement {
    let factors = v
        .algebra()
        .blocks()
        .map(|(kind, off)| match kind {
            FactorKind::So3 => GroupFactor::So3(exp_so3(&v.block3(off))),
            FactorKind::Se3 => GroupFactor::Se3(exp_se3(&v.block3(off), &v.block3(off + 3))),
        })
        .collect();
    GroupElement { factors }
}

/// Group logarithm; every rotation angle must stay below [`LOG_ANGLE_LIMIT`].
pub fn log_group(g: &GroupElement) -> Result<AlgebraVector> {
    let algebra = g.algebra();
    let mut coords = DVector::zeros(algebra.dim());
    for ((_, off), f) in algebra.blocks().zip(&g.factors) {
        match f {
            GroupFactor::So3(r) => coords.fixed_rows_mut::<3>(off).copy_from(&log_so3(r)?),
            GroupFactor::Se3(m) => {
                let (w, v) = log_se3(m)?;
                coords.fixed_rows_mut::<3>(off).copy_from(&w);
                coords.fixed_rows_mut::<3>(off + 3).copy_from(&v);
            }
        }
    }
    Ok(AlgebraVector::from_raw(algebra, coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hat_of_basis_example() {
        let m = hat(&AlgebraVector::so3(Vector3::new(1.0, 2.0, 3.0))).unwrap();
        assert_eq!(m, Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0));
        assert_eq!(hat3(&Vector3::zeros()), Matrix3::zeros());
        let v = Vector3::new(0.3, -1.1, 2.0);
        assert_eq!(vee(&hat3(&v)).unwrap().block3(0), v);
    }

    #[test]
    fn vee_rejects_non_skew() {
        assert!(matches!(
            vee(&Matrix3::identity()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn quarter_turn_about_z_maps_e1_to_e2() {
        let r = exp_so3(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        assert!((r * Vector3::x() - Vector3::y()).amax() < 1e-12);
        assert_eq!(exp_so3(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn log_exp_roundtrip_small_example() {
        let v = Vector3::new(0.1, 0.2, 0.3);
        assert!((log_so3(&exp_so3(&v)).unwrap() - v).amax() < 1e-10);
    }

    #[test]
    fn log_rejects_half_turn() {
        let r = exp_so3(&Vector3::new(PI, 0.0, 0.0));
        let err = log_so3(&r).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn log_exp_roundtrip_random_in_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..10_000 {
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            // Cover tiny, moderate and near-limit angles.
            let angle = match i % 3 {
                0 => rng.gen_range(0.0..1e-3),
                1 => rng.gen_range(0.0..LOG_ANGLE_LIMIT),
                _ => rng.gen_range(3.0..LOG_ANGLE_LIMIT),
            };
            let w = dir * angle;
            let back = log_so3(&exp_so3(&w)).unwrap();
            assert!((back - w).amax() < 1e-10, "angle {angle}");

            let v = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0.5);
            let (w2, v2) = log_se3(&exp_se3(&w, &v)).unwrap();
            assert!((w2 - w).amax() < 1e-10);
            assert!((v2 - v).amax() < 1e-9, "angle {angle}: {}", (v2 - v).amax());
        }
    }

    #[test]
    fn right_jacobian_matches_finite_difference() {
        let phi = Vector3::new(0.4, -0.7, 1.1);
        let jr = right_jacobian_so3(&phi);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let d = (exp_so3(&(phi + e)) - exp_so3(&(phi - e))) / (2.0 * h);
            let body = vee3(&(exp_so3(&phi).transpose() * d));
            assert!((body - jr.column(k)).amax() < 1e-8);
        }
    }

    #[test]
    fn group_element_invariants_are_checked() {
        assert!(GroupElement::so3(Matrix3::identity() * 2.0).is_err());
        let mut m = Matrix4::identity();
        m[(3, 0)] = 1e-3;
        assert!(GroupElement::se3(m).is_err());
        let g = exp_group(&AlgebraVector::se3(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 3.0)));
        let back = GroupElement::from_row_major(Algebra::se3(), &g.to_row_major()).unwrap();
        assert_eq!(back, g);
        let e = &g * &g.inverse();
        assert!((e.matrix() - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn reprojection_restores_orthonormality() {
        let r = exp_so3(&Vector3::new(0.3, 0.2, -0.5)) + Matrix3::repeat(1e-7);
        let g = GroupElement::from_factors_unchecked(vec![GroupFactor::So3(r)]).reproject();
        assert!(g.invariant_defect() < 1e-14);
    }
}
