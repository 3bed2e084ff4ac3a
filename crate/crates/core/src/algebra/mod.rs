//! Lie group and Lie algebra primitives for SO(3), SE(3) and finite products
//! of them.
//!
//! Algebra coordinates are plain real vectors. so(3) uses the usual axis
//! coordinates, se(3) is ordered `[ω | v]` (rotational block first), and a
//! product algebra concatenates its factors in order.

mod group;
mod metric;
mod riemann;
pub mod taylor;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use group::{
    exp_group, exp_se3, exp_so3, hat, hat3, log_group, log_se3, log_so3, right_jacobian_so3,
    vee, vee3, GroupElement, GroupFactor, LOG_ANGLE_LIMIT,
};
pub use metric::MetricSpec;
pub use riemann::{
    cov_der_compact, cov_der_invariant, curv_compact, curv_invariant, LieConnection,
};

/// Maximum number of factors in a product algebra.
pub const MAX_FACTORS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    So3,
    Se3,
}

impl FactorKind {
    pub const fn dim(self) -> usize {
        match self {
            FactorKind::So3 => 3,
            FactorKind::Se3 => 6,
        }
    }

    /// Size of the square matrix representing a group element.
    pub const fn matrix_dim(self) -> usize {
        match self {
            FactorKind::So3 => 3,
            FactorKind::Se3 => 4,
        }
    }

    pub const fn is_compact(self) -> bool {
        matches!(self, FactorKind::So3)
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorKind::So3 => write!(f, "so3"),
            FactorKind::Se3 => write!(f, "se3"),
        }
    }
}

/// Tag identifying which (product) Lie algebra a vector lives in.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Algebra {
    kinds: [FactorKind; MAX_FACTORS],
    len: u8,
}

impl Algebra {
    pub fn so3() -> Self {
        Self::single(FactorKind::So3)
    }

    pub fn se3() -> Self {
        Self::single(FactorKind::Se3)
    }

    pub fn single(kind: FactorKind) -> Self {
        let mut kinds = [FactorKind::So3; MAX_FACTORS];
        kinds[0] = kind;
        Self { kinds, len: 1 }
    }

    pub fn product(factors: &[FactorKind]) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_FACTORS {
            return Err(invalid(format!(
                "product algebra needs between 1 and {MAX_FACTORS} factors, got {}",
                factors.len()
            )));
        }
        let mut kinds = [FactorKind::So3; MAX_FACTORS];
        kinds[..factors.len()].copy_from_slice(factors);
        Ok(Self {
            kinds,
            len: factors.len() as u8,
        })
    }

    /// `so(3)^k`, the algebra of a compact product base.
    pub fn so3_power(k: usize) -> Result<Self> {
        Self::product(&vec![FactorKind::So3; k])
    }

    pub fn factors(&self) -> &[FactorKind] {
        &self.kinds[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.factors().iter().map(|k| k.dim()).sum()
    }

    pub fn is_compact(&self) -> bool {
        self.factors().iter().all(|k| k.is_compact())
    }

    /// `(kind, offset)` of each factor block inside a coordinate vector.
    pub fn blocks(&self) -> impl Iterator<Item = (FactorKind, usize)> + '_ {
        self.factors().iter().scan(0usize, |offset, &kind| {
            let start = *offset;
            *offset += kind.dim();
            Some((kind, start))
        })
    }
}

impl fmt::Debug for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.factors().iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// Coordinates of a Lie algebra element.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector {
    algebra: Algebra,
    coords: DVector<f64>,
}

impl AlgebraVector {
    pub fn new(algebra: Algebra, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != algebra.dim() {
            return Err(invalid(format!(
                "{algebra} needs {} coordinates, got {}",
                algebra.dim(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite coordinate in {algebra} vector")));
        }
        Ok(Self { algebra, coords })
    }

    pub fn from_slice(algebra: Algebra, coords: &[f64]) -> Result<Self> {
        Self::new(algebra, DVector::from_column_slice(coords))
    }

    pub fn zeros(algebra: Algebra) -> Self {
        Self {
            algebra,
            coords: DVector::zeros(algebra.dim()),
        }
    }

    pub fn so3(v: Vector3<f64>) -> Self {
        Self {
            algebra: Algebra::so3(),
            coords: DVector::from_column_slice(v.as_slice()),
        }
    }

    pub fn se3(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        let mut coords = DVector::zeros(6);
        coords.fixed_rows_mut::<3>(0).copy_from(&omega);
        coords.fixed_rows_mut::<3>(3).copy_from(&v);
        Self {
            algebra: Algebra::se3(),
            coords,
        }
    }

    /// Wraps coordinates without the finiteness scan; used on hot paths where
    /// the inputs were already validated.
    pub(crate) fn from_raw(algebra: Algebra, coords: DVector<f64>) -> Self {
        debug_assert_eq!(coords.len(), algebra.dim());
        Self { algebra, coords }
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn amax(&self) -> f64 {
        self.coords.amax()
    }

    pub(crate) fn block3(&self, offset: usize) -> Vector3<f64> {
        self.coords.fixed_rows::<3>(offset).into_owned()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            algebra: self.algebra,
            coords: &self.coords * s,
        }
    }

    fn check_same(&self, other: &Self, op: &str) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(invalid(format!(
                "{op}: mismatched algebras {} and {}",
                self.algebra, other.algebra
            )));
        }
        Ok(())
    }
}

impl Add<&AlgebraVector> for &AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, rhs: &AlgebraVector) -> AlgebraVector {
        assert_eq!(self.algebra, rhs.algebra, "adding vectors of different algebras");
        AlgebraVector::from_raw(self.algebra, &self.coords + &rhs.coords)
    }
}

impl Add for AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, rhs: AlgebraVector) -> AlgebraVector {
        &self + &rhs
    }
}

impl Sub<&AlgebraVector> for &AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, rhs: &AlgebraVector) -> AlgebraVector {
        assert_eq!(self.algebra, rhs.algebra, "subtracting vectors of different algebras");
        AlgebraVector::from_raw(self.algebra, &self.coords - &rhs.coords)
    }
}

impl Sub for AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, rhs: AlgebraVector) -> AlgebraVector {
        &self - &rhs
    }
}

impl Add<&AlgebraVector> for AlgebraVector {
    type Output = AlgebraVector;
    fn add(mut self, rhs: &AlgebraVector) -> AlgebraVector {
        self += rhs;
        self
    }
}

impl Sub<&AlgebraVector> for AlgebraVector {
    type Output = AlgebraVector;
    fn sub(mut self, rhs: &AlgebraVector) -> AlgebraVector {
        self -= rhs;
        self
    }
}

impl AddAssign<&AlgebraVector> for AlgebraVector {
    fn add_assign(&mut self, rhs: &AlgebraVector) {
        assert_eq!(self.algebra, rhs.algebra);
        self.coords += &rhs.coords;
    }
}

impl AddAssign for AlgebraVector {
    fn add_assign(&mut self, rhs: AlgebraVector) {
        *self += &rhs;
    }
}

impl SubAssign<&AlgebraVector> for AlgebraVector {
    fn sub_assign(&mut self, rhs: &AlgebraVector) {
        assert_eq!(self.algebra, rhs.algebra);
        self.coords -= &rhs.coords;
    }
}

impl Mul<f64> for &AlgebraVector {
    type Output = AlgebraVector;
    fn mul(self, s: f64) -> AlgebraVector {
        self.scale(s)
    }
}

impl Mul<f64> for AlgebraVector {
    type Output = AlgebraVector;
    fn mul(mut self, s: f64) -> AlgebraVector {
        self.coords *= s;
        self
    }
}

impl Neg for AlgebraVector {
    type Output = AlgebraVector;
    fn neg(mut self) -> AlgebraVector {
        self.coords.neg_mut();
        self
    }
}

impl Neg for &AlgebraVector {
    type Output = AlgebraVector;
    fn neg(self) -> AlgebraVector {
        self.scale(-1.0)
    }
}

/// Lie bracket, blockwise over product factors.
///
/// so(3): `a × b`; se(3): `(ω_a × ω_b, ω_a × v_b − ω_b × v_a)`.
pub fn bracket(a: &AlgebraVector, b: &AlgebraVector) -> Result<AlgebraVector> {
    a.check_same(b, "bracket")?;
    Ok(bracket_unchecked(a, b))
}

pub(crate) fn bracket_unchecked(a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
    let mut out = DVector::zeros(a.dim());
    for (kind, off) in a.algebra.blocks() {
        let wa = a.block3(off);
        let wb = b.block3(off);
        out.fixed_rows_mut::<3>(off).copy_from(&wa.cross(&wb));
        if kind == FactorKind::Se3 {
            let va = a.block3(off + 3);
            let vb = b.block3(off + 3);
            out.fixed_rows_mut::<3>(off + 3)
                .copy_from(&(wa.cross(&vb) - wb.cross(&va)));
        }
    }
    AlgebraVector::from_raw(a.algebra, out)
}

/// `ad_ξᵀ μ`, the matrix transpose of `η ↦ [ξ, η]` applied to `μ`.
///
/// With the Euclidean pairing of coordinates this is the coadjoint action
/// `ad*_ξ μ`.
pub fn ad_transpose(xi: &AlgebraVector, mu: &AlgebraVector) -> Result<AlgebraVector> {
    xi.check_same(mu, "ad_transpose")?;
    Ok(ad_transpose_unchecked(xi, mu))
}

pub(crate) fn ad_transpose_unchecked(xi: &AlgebraVector, mu: &AlgebraVector) -> AlgebraVector {
    let mut out = DVector::zeros(xi.dim());
    for (kind, off) in xi.algebra.blocks() {
        let w = xi.block3(off);
        let mr = mu.block3(off);
        match kind {
            FactorKind::So3 => {
                out.fixed_rows_mut::<3>(off).copy_from(&mr.cross(&w));
            }
            FactorKind::Se3 => {
                let v = xi.block3(off + 3);
                let mt = mu.block3(off + 3);
                out.fixed_rows_mut::<3>(off)
                    .copy_from(&(mr.cross(&w) + mt.cross(&v)));
                out.fixed_rows_mut::<3>(off + 3).copy_from(&mt.cross(&w));
            }
        }
    }
    AlgebraVector::from_raw(xi.algebra, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(alg: Algebra, rng: &mut impl Rng) -> AlgebraVector {
        let c: Vec<f64> = (0..alg.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        AlgebraVector::from_slice(alg, &c).unwrap()
    }

    fn algebras() -> Vec<Algebra> {
        vec![
            Algebra::so3(),
            Algebra::se3(),
            Algebra::product(&[FactorKind::So3, FactorKind::So3]).unwrap(),
            Algebra::product(&[FactorKind::So3, FactorKind::Se3]).unwrap(),
        ]
    }

    #[test]
    fn bracket_of_basis_vectors() {
        let e1 = AlgebraVector::so3(Vector3::x());
        let e2 = AlgebraVector::so3(Vector3::y());
        assert_eq!(bracket(&e1, &e2).unwrap().coords().as_slice(), &[0.0, 0.0, 1.0]);

        let xi = AlgebraVector::se3(Vector3::z(), Vector3::zeros());
        let eta = AlgebraVector::se3(Vector3::zeros(), Vector3::x());
        let b = bracket(&xi, &eta).unwrap();
        assert_eq!(b.coords().as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn bracket_rejects_mixed_algebras() {
        let a = AlgebraVector::zeros(Algebra::so3());
        let b = AlgebraVector::zeros(Algebra::se3());
        assert!(matches!(bracket(&a, &b), Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn bracket_is_antisymmetric_and_satisfies_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for alg in algebras() {
            for _ in 0..1000 {
                let a = random(alg, &mut rng);
                let b = random(alg, &mut rng);
                let c = random(alg, &mut rng);
                assert!(bracket(&a, &a).unwrap().amax() == 0.0);
                let ab = bracket(&a, &b).unwrap();
                let ba = bracket(&b, &a).unwrap();
                assert!((&ab + &ba).amax() < 1e-14);
                let jac = bracket(&a, &bracket(&b, &c).unwrap()).unwrap()
                    + bracket(&b, &bracket(&c, &a).unwrap()).unwrap()
                    + bracket(&c, &ab).unwrap();
                assert!(jac.amax() <= 1e-10, "{alg}: {}", jac.amax());
            }
        }
    }

    #[test]
    fn ad_transpose_is_the_matrix_transpose_of_ad() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alg in algebras() {
            let xi = random(alg, &mut rng);
            let eta = random(alg, &mut rng);
            let mu = random(alg, &mut rng);
            let lhs = mu.coords().dot(bracket(&xi, &eta).unwrap().coords());
            let rhs = ad_transpose(&xi, &mu).unwrap().coords().dot(eta.coords());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_rejects_wrong_dimension_and_nan() {
        assert!(AlgebraVector::from_slice(Algebra::se3(), &[1.0, 2.0, 3.0]).is_err());
        assert!(AlgebraVector::from_slice(Algebra::so3(), &[1.0, f64::NAN, 3.0]).is_err());
    }
}
