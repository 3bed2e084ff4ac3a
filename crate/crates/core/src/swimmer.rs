//! The generalized Purcell swimmer: shape `(R₁, R₂) ∈ SO(3)×SO(3)`, position
//! `g ∈ SE(3)`, identity metrics, and closed-form elastic terms for both.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::algebra::{Algebra, AlgebraVector, FactorKind, GroupElement};
use crate::connection::{connection_jet, LocalConnection};
use crate::error::{invalid, Result};
use crate::geometry::{BaseJet, BaseKind, BasePoint, BundleSpec, CurveJet};

/// Name under which the swimmer is registered in problem files.
pub const SYSTEM_NAME: &str = "purcell_generalized";

/// `(SO(3)×SO(3)) × SE(3)` with identity metrics on both factors.
pub fn swimmer_bundle() -> BundleSpec {
    BundleSpec::with_identity_metrics(BaseKind::CompactGroup(2), Algebra::se3())
        .expect("identity metrics are valid")
}

#[derive(Clone, Debug)]
pub struct SwimmerState {
    pub r1: GroupElement,
    pub r2: GroupElement,
    pub g: GroupElement,
    pub omega1: AlgebraVector,
    pub omega2: AlgebraVector,
    /// `(ξ_R, ξ_T)`.
    pub xi: AlgebraVector,
}

impl SwimmerState {
    pub fn new(
        r1: GroupElement,
        r2: GroupElement,
        g: GroupElement,
        omega1: AlgebraVector,
        omega2: AlgebraVector,
        xi: AlgebraVector,
    ) -> Result<Self> {
        let so3 = Algebra::so3();
        for (name, a) in [("R1", r1.algebra()), ("R2", r2.algebra()), ("omega1", omega1.algebra()), ("omega2", omega2.algebra())] {
            if a != so3 {
                return Err(invalid(format!("{name} must live in so3, got {a}")));
            }
        }
        if g.algebra() != Algebra::se3() || xi.algebra() != Algebra::se3() {
            return Err(invalid("g and xi must live in se3"));
        }
        Ok(Self { r1, r2, g, omega1, omega2, xi })
    }

    pub fn shape(&self) -> BasePoint {
        let factors = self.r1.factors().iter().chain(self.r2.factors()).cloned().collect();
        BasePoint::Group(GroupElement::new(factors).expect("two rotations"))
    }

    pub fn shape_velocity(&self) -> DVector<f64> {
        let mut v = DVector::zeros(6);
        v.rows_mut(0, 3).copy_from(self.omega1.coords());
        v.rows_mut(3, 3).copy_from(self.omega2.coords());
        v
    }

    /// `‖ξ + A(R₁, R₂)(ω₁, ω₂)‖∞`.
    pub fn constraint_defect(&self, conn: &LocalConnection) -> Result<f64> {
        let a = conn.eval(&self.shape())?;
        Ok((self.xi.coords() + a * self.shape_velocity()).amax())
    }
}

fn block(v: &AlgebraVector, off: usize) -> Vector3<f64> {
    let c = v.coords();
    Vector3::new(c[off], c[off + 1], c[off + 2])
}

/// `[ω⃛₁ − ω̈₁×ω₁, ω⃛₂ − ω̈₂×ω₂]`.
pub fn swimmer_base_elastic(omega1: &CurveJet<AlgebraVector>, omega2: &CurveJet<AlgebraVector>) -> DVector<f64> {
    let mut out = DVector::zeros(6);
    for (off, w) in [(0, omega1), (3, omega2)] {
        let e = block(&w.d3, 0) - block(&w.d2, 0).cross(&block(&w.value, 0));
        out.rows_mut(off, 3).copy_from(&e);
    }
    out
}

/// Coefficients of the closed-form group elastic term on `se(3)`, `r = ξ_R`,
/// `v = ξ_T`, nested crosses associating to the right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwimmerCoefficients {
    /// `r⃛, r×r̈, r×(r×ṙ), r×(ṙ×r), (ṙ×r)×r`.
    pub rotational: [f64; 5],
    /// `v⃛, r×v̈, ṙ×v̇, r̈×v, r×(r×v̇), r×(ṙ×v), ṙ×(r×v), r×(r×(r×v))`.
    pub translational: [f64; 8],
}

pub const ROTATIONAL_TERMS: [&str; 5] = ["r'''", "r x r''", "r x (r x r')", "r x (r' x r)", "(r' x r) x r"];
pub const TRANSLATIONAL_TERMS: [&str; 8] = [
    "v'''",
    "r x v''",
    "r' x v'",
    "r'' x v",
    "r x (r x v')",
    "r x (r' x v)",
    "r' x (r x v)",
    "r x (r x (r x v))",
];

impl SwimmerCoefficients {
    /// The coefficients as commonly printed for this system.
    pub const PRINTED: Self = Self {
        rotational: [1.0, 1.5, 0.5, 0.5, 1.0],
        translational: [1.0, 3.0, 3.0, 1.0, 2.5, 3.5, 2.0, 0.5],
    };

    /// The coefficients obtained by expanding the general left-invariant
    /// elastic term with `∇_ξη = (½ r×s, r×u)` for `η = (s, u)`.
    pub const CORRECTED: Self = Self {
        rotational: [1.0, 1.0, 0.0, 0.0, 0.0],
        translational: [1.0, 3.0, 3.0, 1.0, 3.0, 2.0, 1.0, 1.0],
    };
}

/// Closed-form group elastic term for the given coefficient set.
pub fn swimmer_group_elastic_with(jet: &CurveJet<AlgebraVector>, c: &SwimmerCoefficients) -> Result<AlgebraVector> {
    if jet.value.algebra() != Algebra::se3() {
        return Err(invalid(format!("swimmer group jet must be in se3, got {}", jet.value.algebra())));
    }
    let (r, r1, r2, r3) = (block(&jet.value, 0), block(&jet.d1, 0), block(&jet.d2, 0), block(&jet.d3, 0));
    let (v, v1, v2, v3) = (block(&jet.value, 3), block(&jet.d1, 3), block(&jet.d2, 3), block(&jet.d3, 3));
    let k = &c.rotational;
    let rot = r3 * k[0]
        + r.cross(&r2) * k[1]
        + r.cross(&r.cross(&r1)) * k[2]
        + r.cross(&r1.cross(&r)) * k[3]
        + r1.cross(&r).cross(&r) * k[4];
    let k = &c.translational;
    let tra = v3 * k[0]
        + r.cross(&v2) * k[1]
        + r1.cross(&v1) * k[2]
        + r2.cross(&v) * k[3]
        + r.cross(&r.cross(&v1)) * k[4]
        + r.cross(&r1.cross(&v)) * k[5]
        + r1.cross(&r.cross(&v)) * k[6]
        + r.cross(&r.cross(&r.cross(&v))) * k[7];
    Ok(AlgebraVector::se3(rot, tra))
}

/// Closed form with the printed coefficients.
pub fn swimmer_group_elastic(jet: &CurveJet<AlgebraVector>) -> Result<AlgebraVector> {
    swimmer_group_elastic_with(jet, &SwimmerCoefficients::PRINTED)
}

/// Closed form with the corrected coefficients.
pub fn swimmer_group_elastic_corrected(jet: &CurveJet<AlgebraVector>) -> Result<AlgebraVector> {
    swimmer_group_elastic_with(jet, &SwimmerCoefficients::CORRECTED)
}

#[derive(Clone, Debug, Serialize)]
pub struct TermDiff {
    pub row: &'static str,
    pub term: &'static str,
    pub printed: f64,
    pub corrected: f64,
}

/// Printed and corrected closed forms against the general elastic term on
/// `se(3)` with identity metric, plus the per-term coefficient differences.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientReport {
    pub jets: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub printed_max_error: f64,
    pub corrected_max_error: f64,
    pub printed_agrees: bool,
    pub corrected_agrees: bool,
    pub differing_terms: Vec<TermDiff>,
}

pub fn coefficient_report(jets: usize, seed: u64) -> CoefficientReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let se3 = Algebra::se3();
    let metric = crate::algebra::MetricSpec::identity(6);
    let (mut printed, mut corrected): (f64, f64) = (0.0, 0.0);
    for _ in 0..jets {
        let mut r = || AlgebraVector::new(se3, DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0))).expect("finite");
        let jet = CurveJet::new(r(), r(), r(), r());
        let generic = crate::geometry::elastic_group(&metric, &jet).expect("se3 jet");
        let p = swimmer_group_elastic(&jet).expect("se3 jet");
        let c = swimmer_group_elastic_corrected(&jet).expect("se3 jet");
        printed = printed.max((p - generic.clone()).amax());
        corrected = corrected.max((c - generic).amax());
    }
    let (p, c) = (SwimmerCoefficients::PRINTED, SwimmerCoefficients::CORRECTED);
    let rows = ROTATIONAL_TERMS
        .iter()
        .zip(p.rotational.iter().zip(c.rotational))
        .map(|(t, (a, b))| ("rotational", *t, *a, b))
        .chain(
            TRANSLATIONAL_TERMS
                .iter()
                .zip(p.translational.iter().zip(c.translational))
                .map(|(t, (a, b))| ("translational", *t, *a, b)),
        );
    let differing_terms = rows
        .filter(|(_, _, a, b)| a != b)
        .map(|(row, term, printed, corrected)| TermDiff { row, term, printed, corrected })
        .collect();
    let tolerance = 1e-10;
    CoefficientReport {
        jets,
        seed,
        tolerance,
        printed_max_error: printed,
        corrected_max_error: corrected,
        printed_agrees: printed <= tolerance,
        corrected_agrees: corrected <= tolerance,
        differing_terms,
    }
}

/// `𝔸ᵀ e = Aᵀ e` (identity metrics on both factors).
pub fn swimmer_adjoint_term(a: &DMatrix<f64>, group_elastic: &AlgebraVector) -> Result<DVector<f64>> {
    if a.nrows() != 6 || a.ncols() != 6 || group_elastic.algebra() != Algebra::se3() {
        return Err(invalid("swimmer connection must be a 6×6 matrix acting into se3"));
    }
    Ok(a.tr_mul(group_elastic.coords()))
}

/// Splits a base velocity jet on SO(3)×SO(3) into the two `ω` jets.
pub fn split_shape_jet(jet: &CurveJet<DVector<f64>>) -> Result<(CurveJet<AlgebraVector>, CurveJet<AlgebraVector>)> {
    if jet.value.len() != 6 {
        return Err(invalid(format!("shape jet must be 6-dimensional, got {}", jet.value.len())));
    }
    let part = |off: usize| {
        jet.map(|v| AlgebraVector::new(Algebra::so3(), v.rows(off, 3).into_owned()))
    };
    let lift = |j: CurveJet<Result<AlgebraVector>>| -> Result<CurveJet<AlgebraVector>> {
        Ok(CurveJet::new(j.value?, j.d1?, j.d2?, j.d3?))
    };
    Ok((lift(part(0))?, lift(part(3))?))
}

/// `swimmer_base_elastic − 𝔸ᵀ E(ξ)` at one time, with `ξ = −A(R₁, R₂)(ω₁, ω₂)`
/// and the group elastic term `E` from the given coefficient set. `jet` is
/// the shape jet (exponential-chart coordinates, through the fourth
/// derivative) and `h_fd` the time step for the connection jet.
pub fn swimmer_residual(
    conn: &LocalConnection,
    jet: &BaseJet,
    h_fd: f64,
    coefficients: &SwimmerCoefficients,
) -> Result<DVector<f64>> {
    let so3 = [FactorKind::So3, FactorKind::So3];
    let base_ok = matches!(jet, BaseJet::Chart { anchor, .. } if anchor.algebra() == Algebra::product(&so3)?);
    if !base_ok || conn.base_dim() != 6 || conn.algebra() != Algebra::se3() {
        return Err(invalid(
            "swimmer residual needs an SO(3)×SO(3) shape jet and a connection into se3",
        ));
    }
    let (w1, w2) = split_shape_jet(&jet.velocity_jet())?;
    let xi = connection_jet(conn, jet, h_fd)?;
    let e = swimmer_group_elastic_with(&xi, coefficients)?;
    let a = conn.eval(&jet.point())?;
    Ok(swimmer_base_elastic(&w1, &w2) - swimmer_adjoint_term(&a, &e)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{exp_group, MetricSpec};
    use crate::geometry::{elastic_base, elastic_group};
    use crate::interpolator::{euler_lagrange, ResidualForm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_jet(alg: Algebra, rng: &mut impl Rng) -> CurveJet<AlgebraVector> {
        let mut r = || AlgebraVector::new(alg, DVector::from_fn(alg.dim(), |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        CurveJet::new(r(), r(), r(), r())
    }

    #[test]
    fn base_elastic_trivial_cases() {
        let z = CurveJet::<AlgebraVector>::zeros(Algebra::so3());
        assert_eq!(swimmer_base_elastic(&z, &z).amax(), 0.0);
        let mut c = z.clone();
        c.value = AlgebraVector::so3(Vector3::new(0.3, -1.0, 2.0));
        assert_eq!(swimmer_base_elastic(&c, &z).amax(), 0.0);
    }

    #[test]
    fn base_elastic_matches_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = swimmer_bundle();
        for _ in 0..1000 {
            let (w1, w2) = (random_jet(Algebra::so3(), &mut rng), random_jet(Algebra::so3(), &mut rng));
            let joined = CurveJet::new(
                DVector::from_iterator(6, w1.value.coords().iter().chain(w2.value.coords().iter()).copied()),
                DVector::from_iterator(6, w1.d1.coords().iter().chain(w2.d1.coords().iter()).copied()),
                DVector::from_iterator(6, w1.d2.coords().iter().chain(w2.d2.coords().iter()).copied()),
                DVector::from_iterator(6, w1.d3.coords().iter().chain(w2.d3.coords().iter()).copied()),
            );
            let generic = elastic_base(&spec, &joined).unwrap();
            assert!((swimmer_base_elastic(&w1, &w2) - generic).amax() < 1e-12);
        }
    }

    #[test]
    fn group_elastic_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut jet = random_jet(Algebra::se3(), &mut rng);
        for v in [&mut jet.value, &mut jet.d1, &mut jet.d2, &mut jet.d3] {
            let t = block(v, 3);
            *v = AlgebraVector::se3(Vector3::zeros(), t);
        }
        for c in [SwimmerCoefficients::PRINTED, SwimmerCoefficients::CORRECTED] {
            let e = swimmer_group_elastic_with(&jet, &c).unwrap();
            assert!((e.coords() - jet.d3.coords()).amax() < 1e-15);
        }
        let constant = CurveJet::new(
            AlgebraVector::se3(Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0)),
            AlgebraVector::zeros(Algebra::se3()),
            AlgebraVector::zeros(Algebra::se3()),
            AlgebraVector::zeros(Algebra::se3()),
        );
        assert_eq!(swimmer_group_elastic(&constant).unwrap().amax(), 0.0);
    }

    #[test]
    fn corrected_coefficients_match_generic_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let id = MetricSpec::identity(6);
        let (mut corrected, mut printed): (f64, f64) = (0.0, 0.0);
        for _ in 0..1000 {
            let jet = random_jet(Algebra::se3(), &mut rng);
            let generic = elastic_group(&id, &jet).unwrap();
            corrected = corrected.max((swimmer_group_elastic_corrected(&jet).unwrap() - generic.clone()).amax());
            printed = printed.max((swimmer_group_elastic(&jet).unwrap() - generic).amax());
        }
        assert!(corrected < 1e-10, "{corrected}");
        // The printed set is not an identity-equivalent rewriting.
        assert!(printed > 1e-2, "{printed}");
    }

    #[test]
    fn report_lists_differing_terms() {
        let r = coefficient_report(200, 1);
        assert!(r.corrected_agrees && !r.printed_agrees);
        let names: Vec<_> = r.differing_terms.iter().map(|t| t.term).collect();
        assert!(names.contains(&"r x (r x v')") && names.contains(&"r x (r x (r x v))"));
        assert_eq!(r.differing_terms.len(), 8);
    }

    #[test]
    fn adjoint_term_is_linear() {
        let a = DMatrix::from_fn(6, 6, |i, j| ((i * 6 + j) as f64).sin());
        let e = AlgebraVector::se3(Vector3::new(0.1, -0.4, 2.0), Vector3::new(1.0, 0.0, -3.0));
        let once = swimmer_adjoint_term(&a, &e).unwrap();
        let scaled = swimmer_adjoint_term(&a, &(e * 2.5)).unwrap();
        assert!((scaled - once * 2.5).amax() < 1e-12);
    }

    fn chart_jet(rng: &mut impl Rng) -> BaseJet {
        let anchor = {
            let a = exp_group(&AlgebraVector::so3(Vector3::new(0.2, -0.5, 0.1)));
            let b = exp_group(&AlgebraVector::so3(Vector3::new(-0.3, 0.4, 0.6)));
            GroupElement::new(a.factors().iter().chain(b.factors()).cloned().collect()).unwrap()
        };
        let derivs = std::array::from_fn(|k| DVector::from_fn(6, |_, _| rng.gen_range(-0.5..0.5) / (k + 1) as f64));
        BaseJet::Chart { anchor, derivs }
    }

    #[test]
    fn residual_matches_generic_adjoint_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let conn = LocalConnection::purcell_test();
        let spec = swimmer_bundle();
        for _ in 0..50 {
            let jet = chart_jet(&mut rng);
            let ours = swimmer_residual(&conn, &jet, 1e-3, &SwimmerCoefficients::CORRECTED).unwrap();
            let generic = euler_lagrange(&spec, &conn, &jet, 1e-3, ResidualForm::Adjoint).unwrap();
            assert!((ours - generic).amax() < 1e-9);
        }
    }

    #[test]
    fn residual_zero_connection_reduces_to_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conn = LocalConnection::zero(6, Algebra::se3());
        let jet = chart_jet(&mut rng);
        let (w1, w2) = split_shape_jet(&jet.velocity_jet()).unwrap();
        let r = swimmer_residual(&conn, &jet, 1e-3, &SwimmerCoefficients::PRINTED).unwrap();
        assert!((r - swimmer_base_elastic(&w1, &w2)).amax() < 1e-14);
    }

    #[test]
    fn residual_rejects_wrong_shapes() {
        let conn = LocalConnection::zero(3, Algebra::se3());
        let jet = BaseJet::Euclidean { derivs: std::array::from_fn(|_| DVector::zeros(3)) };
        assert!(swimmer_residual(&conn, &jet, 1e-3, &SwimmerCoefficients::CORRECTED).is_err());
    }

    #[test]
    fn state_constraint_defect() {
        let conn = LocalConnection::purcell_test();
        let r1 = exp_group(&AlgebraVector::so3(Vector3::new(0.1, 0.2, 0.3)));
        let r2 = exp_group(&AlgebraVector::so3(Vector3::new(-0.2, 0.0, 0.4)));
        let (w1, w2) = (AlgebraVector::so3(Vector3::new(1.0, 0.0, 0.5)), AlgebraVector::so3(Vector3::new(0.0, -1.0, 0.2)));
        let mut s = SwimmerState::new(r1, r2, GroupElement::identity(Algebra::se3()), w1, w2, AlgebraVector::zeros(Algebra::se3())).unwrap();
        let a = conn.eval(&s.shape()).unwrap();
        s.xi = AlgebraVector::new(Algebra::se3(), -(a * s.shape_velocity())).unwrap();
        assert!(s.constraint_defect(&conn).unwrap() < 1e-14);
        assert!(SwimmerState::new(
            GroupElement::identity(Algebra::se3()),
            s.r2.clone(),
            s.g.clone(),
            s.omega1.clone(),
            s.omega2.clone(),
            s.xi.clone()
        )
        .is_err());
    }
}
