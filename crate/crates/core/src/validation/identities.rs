//! Seeded identity checks for brackets, connections and curvature, plus a
//! coordinate (Christoffel-symbol) oracle for the product connection.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::taylor::body_velocity_jet;
use crate::algebra::{
    bracket_unchecked, hat3, right_jacobian_so3, vee3, Algebra, AlgebraVector, FactorKind,
    LieConnection, MetricSpec,
};
use crate::geometry::{covariant_acceleration, BaseKind, BundleSpec, CurveJet};

/// `(ξ, η) ↦ ∇_ξ η` supplied by the caller instead of the built-in formula.
pub type CustomConnection<'a> = &'a dyn Fn(&AlgebraVector, &AlgebraVector) -> AlgebraVector;

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

impl IdentityReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const ALGEBRAIC_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 2e-6;
const SAMPLES: usize = 500;
const ORACLE_SAMPLES: usize = 50;
const ORACLE_STEP: f64 = 1e-4;

fn random_vector(alg: Algebra, rng: &mut impl Rng) -> AlgebraVector {
    let c = DVector::from_fn(alg.dim(), |_, _| rng.gen_range(-1.0..1.0));
    AlgebraVector::new(alg, c).expect("finite")
}

struct Suite {
    checks: Vec<IdentityCheck>,
}

impl Suite {
    fn push(&mut self, name: impl Into<String>, max_error: f64, tolerance: f64) {
        self.checks.push(IdentityCheck {
            name: name.into(),
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        });
    }
}

/// Runs every identity on the bundle's group (and on its base when the base
/// is a compact group) with the built-in connection formulas.
pub fn identity_suite(bundle: &BundleSpec, seed: u64) -> IdentityReport {
    identity_suite_with(bundle, seed, None)
}

/// As [`identity_suite`], but the connection-level checks on the group use
/// `custom` when given (e.g. a deliberately corrupted connection).
pub fn identity_suite_with(
    bundle: &BundleSpec,
    seed: u64,
    custom: Option<CustomConnection<'_>>,
) -> IdentityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Suite { checks: Vec::new() };
    let group_conn = bundle.group_connection();
    let builtin = |a: &AlgebraVector, b: &AlgebraVector| group_conn.cov(a, b);
    let cov: CustomConnection<'_> = custom.unwrap_or(&builtin);
    connection_checks(&mut suite, "group", bundle.group(), bundle.group_metric(), cov, &mut rng);
    if let Some(base_alg) = bundle.base_algebra() {
        let base_conn = LieConnection::Compact { algebra: base_alg };
        let f = |a: &AlgebraVector, b: &AlgebraVector| base_conn.cov(a, b);
        connection_checks(&mut suite, "base", base_alg, bundle.base_metric(), &f, &mut rng);
    }
    shortcut_checks(&mut suite, &mut rng);
    splitting_checks(&mut suite, bundle, &mut rng);
    let passed = suite.checks.iter().all(|c| c.passed);
    IdentityReport {
        seed,
        checks: suite.checks,
        passed,
    }
}

fn connection_checks(
    suite: &mut Suite,
    label: &str,
    alg: Algebra,
    metric: &MetricSpec,
    cov: CustomConnection<'_>,
    rng: &mut impl Rng,
) {
    let curv = |x: &AlgebraVector, y: &AlgebraVector, z: &AlgebraVector| {
        cov(x, &cov(y, z)) - cov(y, &cov(x, z)) - cov(&bracket_unchecked(x, y), z)
    };
    let (mut jacobi, mut anti, mut bianchi, mut torsion, mut compat) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..SAMPLES {
        let (x, y, z) = (random_vector(alg, rng), random_vector(alg, rng), random_vector(alg, rng));
        let j = bracket_unchecked(&x, &bracket_unchecked(&y, &z))
            + bracket_unchecked(&y, &bracket_unchecked(&z, &x))
            + bracket_unchecked(&z, &bracket_unchecked(&x, &y));
        jacobi = jacobi.max(j.amax());
        anti = anti.max((curv(&x, &y, &z) + curv(&y, &x, &z)).amax());
        bianchi = bianchi.max((curv(&x, &y, &z) + curv(&y, &z, &x) + curv(&z, &x, &y)).amax());
        torsion = torsion.max((cov(&x, &y) - cov(&y, &x) - bracket_unchecked(&x, &y)).amax());
        let c = metric.inner(cov(&x, &y).coords(), z.coords()) + metric.inner(y.coords(), cov(&x, &z).coords());
        compat = compat.max(c.abs());
    }
    suite.push(format!("{label}:{alg}:jacobi"), jacobi, ALGEBRAIC_TOL);
    suite.push(format!("{label}:{alg}:curvature_antisymmetry"), anti, ALGEBRAIC_TOL);
    suite.push(format!("{label}:{alg}:bianchi"), bianchi, ALGEBRAIC_TOL);
    suite.push(format!("{label}:{alg}:torsion_free"), torsion, ALGEBRAIC_TOL);
    suite.push(format!("{label}:{alg}:metric_compatibility"), compat, ALGEBRAIC_TOL);
}

/// Closed forms against the general left-invariant formulas with identity metrics.
fn shortcut_checks(suite: &mut Suite, rng: &mut impl Rng) {
    let so3 = Algebra::so3();
    let id3 = MetricSpec::identity(3);
    let general = LieConnection::Invariant { algebra: so3, metric: &id3 };
    let compact = LieConnection::Compact { algebra: so3 };
    let mut err: f64 = 0.0;
    for _ in 0..SAMPLES {
        let (x, y, z) = (random_vector(so3, rng), random_vector(so3, rng), random_vector(so3, rng));
        err = err.max((general.cov(&x, &y) - compact.cov(&x, &y)).amax());
        err = err.max((general.curv(&x, &y, &z) - compact.curv(&x, &y, &z)).amax());
    }
    suite.push("so3:compact_vs_general", err, ALGEBRAIC_TOL);

    let se3 = Algebra::se3();
    let id6 = MetricSpec::identity(6);
    let general = LieConnection::Invariant { algebra: se3, metric: &id6 };
    let mut err: f64 = 0.0;
    for _ in 0..SAMPLES {
        let (x, y) = (random_vector(se3, rng), random_vector(se3, rng));
        let (wx, wy, vy) = (x.coords().fixed_rows::<3>(0), y.coords().fixed_rows::<3>(0), y.coords().fixed_rows::<3>(3));
        let block = AlgebraVector::se3(wx.cross(&wy) * 0.5, wx.cross(&vy));
        err = err.max((general.cov(&x, &y) - block).amax());
    }
    suite.push("se3:block_form_vs_general", err, ALGEBRAIC_TOL);
}

fn block_diagonal(metric: &MetricSpec, alg: Algebra) -> bool {
    let blocks: Vec<(usize, usize)> = alg.blocks().map(|(k, off)| (off, off + k.dim())).collect();
    let owner = |i: usize| blocks.iter().position(|(a, b)| i >= *a && i < *b);
    let m = metric.matrix();
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| owner(i) == owner(j) || m[(i, j)] == 0.0))
}

fn splitting_checks(suite: &mut Suite, bundle: &BundleSpec, rng: &mut impl Rng) {
    let alg = bundle.group();
    let n = bundle.base_dim();
    let factorwise = block_diagonal(bundle.group_metric(), alg);
    let mut err: f64 = 0.0;
    for _ in 0..SAMPLES {
        let base = CurveJet::new(
            DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            DVector::zeros(n),
            DVector::zeros(n),
        );
        let t = random_vector(alg, rng);
        let t1 = random_vector(alg, rng);
        let group = CurveJet::new(t.clone(), t1.clone(), AlgebraVector::zeros(alg), AlgebraVector::zeros(alg));
        let (qb, qg) = covariant_acceleration(bundle, &base, &group).expect("dimensions match");
        // Factor by factor, each with its own sub-metric.
        let mut expected = t1.coords().clone();
        if factorwise {
            for (kind, off) in alg.blocks() {
                let d = kind.dim();
                let sub = Algebra::single(kind);
                let metric = MetricSpec::new(bundle.group_metric().matrix().view((off, off), (d, d)).into_owned())
                    .expect("principal submatrix of an SPD matrix");
                let conn = LieConnection::Invariant { algebra: sub, metric: &metric };
                let ts = AlgebraVector::new(sub, t.coords().rows(off, d).into_owned()).expect("finite");
                let mut block = expected.rows_mut(off, d);
                block += conn.cov(&ts, &ts).into_coords();
            }
        } else {
            expected += bundle.group_connection().cov(&t, &t).into_coords();
        }
        let base_expected = match bundle.base_algebra() {
            Some(b) => {
                let w = AlgebraVector::new(b, base.value.clone()).expect("finite");
                &base.d1 + LieConnection::Compact { algebra: b }.cov(&w, &w).into_coords()
            }
            None => base.d1.clone(),
        };
        err = err.max((qb - base_expected).amax()).max((qg.coords() - expected).amax());
    }
    suite.push("product_splitting", err, ALGEBRAIC_TOL);

    let mut oracle_err: f64 = 0.0;
    for _ in 0..ORACLE_SAMPLES {
        oracle_err = oracle_err.max(fd_oracle_sample(bundle, rng));
    }
    suite.push("product_splitting_fd_oracle", oracle_err, ORACLE_TOL);
}

fn se3_hat(c: &[f64]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&Vector3::new(c[0], c[1], c[2])));
    m[(0, 3)] = c[3];
    m[(1, 3)] = c[4];
    m[(2, 3)] = c[5];
    m
}

fn se3_vee(m: &Matrix4<f64>) -> [f64; 6] {
    let w = vee3(&m.fixed_view::<3, 3>(0, 0).into_owned());
    [w.x, w.y, w.z, m[(0, 3)], m[(1, 3)], m[(2, 3)]]
}

/// Body velocity and acceleration of `t ↦ exp(φ(t))` on one factor.
fn factor_body_jet(kind: FactorKind, phi: &[f64], dphi: &[f64], ddphi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match kind {
        FactorKind::So3 => {
            let h = |c: &[f64]| hat3(&Vector3::new(c[0], c[1], c[2]));
            let z = Matrix3::zeros();
            let w = body_velocity_jet(&[h(phi), h(dphi), h(ddphi), z, z]);
            (vee3(&w[0]).as_slice().to_vec(), vee3(&w[1]).as_slice().to_vec())
        }
        FactorKind::Se3 => {
            let z = Matrix4::zeros();
            let w = body_velocity_jet(&[se3_hat(phi), se3_hat(dphi), se3_hat(ddphi), z, z]);
            (se3_vee(&w[0]).to_vec(), se3_vee(&w[1]).to_vec())
        }
    }
}

/// `J(φ)` with `𝔱 = J(φ) φ̇` for an algebra in exponential coordinates.
fn body_jacobian(alg: Algebra, phi: &DVector<f64>) -> DMatrix<f64> {
    let d = alg.dim();
    let mut j = DMatrix::zeros(d, d);
    for (kind, off) in alg.blocks() {
        let k = kind.dim();
        let p = &phi.as_slice()[off..off + k];
        if kind == FactorKind::So3 {
            let jr = right_jacobian_so3(&Vector3::new(p[0], p[1], p[2]));
            j.view_mut((off, off), (3, 3)).copy_from(&jr);
            continue;
        }
        for c in 0..k {
            let mut e = vec![0.0; k];
            e[c] = 1.0;
            let (col, _) = factor_body_jet(kind, p, &e, &vec![0.0; k]);
            for r in 0..k {
                j[(off + r, off + c)] = col[r];
            }
        }
    }
    j
}

fn body_jets(alg: Algebra, phi: &DVector<f64>, dphi: &DVector<f64>, ddphi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut v = DVector::zeros(alg.dim());
    let mut a = DVector::zeros(alg.dim());
    for (kind, off) in alg.blocks() {
        let k = kind.dim();
        let s = |x: &DVector<f64>| x.as_slice()[off..off + k].to_vec();
        let (bv, ba) = factor_body_jet(kind, &s(phi), &s(dphi), &s(ddphi));
        v.rows_mut(off, k).copy_from_slice(&bv);
        a.rows_mut(off, k).copy_from_slice(&ba);
    }
    (v, a)
}

/// Covariant acceleration from Christoffel symbols of the product metric in
/// exponential coordinates, compared with the factor-wise body computation.
fn fd_oracle_sample(bundle: &BundleSpec, rng: &mut impl Rng) -> f64 {
    let nb = bundle.base_dim();
    let galg = bundle.group();
    let ng = galg.dim();
    let dim = nb + ng;
    let mut r = |scale: f64| DVector::from_fn(dim, |_, _| rng.gen_range(-scale..scale));
    let (q, dq, ddq) = (r(0.8), r(1.0), r(1.0));
    let base_alg = bundle.base_algebra();
    let metric = |q: &DVector<f64>| -> DMatrix<f64> {
        let mut g = DMatrix::zeros(dim, dim);
        let gm_base = match (bundle.base(), base_alg) {
            (BaseKind::CompactGroup(_), Some(b)) => {
                let j = body_jacobian(b, &q.rows(0, nb).into_owned());
                j.transpose() * bundle.base_metric().matrix() * j
            }
            _ => bundle.base_metric().matrix().clone(),
        };
        g.view_mut((0, 0), (nb, nb)).copy_from(&gm_base);
        let j = body_jacobian(galg, &q.rows(nb, ng).into_owned());
        g.view_mut((nb, nb), (ng, ng))
            .copy_from(&(j.transpose() * bundle.group_metric().matrix() * j));
        g
    };
    let g0 = metric(&q);
    let dg: Vec<DMatrix<f64>> = (0..dim)
        .map(|l| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[l] += ORACLE_STEP;
            qm[l] -= ORACLE_STEP;
            (metric(&qp) - metric(&qm)) / (2.0 * ORACLE_STEP)
        })
        .collect();
    let mut lowered = DVector::zeros(dim);
    for (i, dgi) in dg.iter().enumerate() {
        lowered += dgi * &dq * dq[i];
    }
    for (l, dgl) in dg.iter().enumerate() {
        lowered[l] -= 0.5 * dq.dot(&(dgl * &dq));
    }
    let coord_acc = &ddq + g0.lu().solve(&lowered).expect("metric is SPD");

    let split = |x: &DVector<f64>, off: usize, len: usize| x.rows(off, len).into_owned();
    let (oracle_base, base_jet) = match base_alg {
        Some(b) => {
            let j = body_jacobian(b, &split(&q, 0, nb));
            let (v, a) = body_jets(b, &split(&q, 0, nb), &split(&dq, 0, nb), &split(&ddq, 0, nb));
            (j * split(&coord_acc, 0, nb), CurveJet::new(v, a, DVector::zeros(nb), DVector::zeros(nb)))
        }
        None => (
            split(&coord_acc, 0, nb),
            CurveJet::new(split(&dq, 0, nb), split(&ddq, 0, nb), DVector::zeros(nb), DVector::zeros(nb)),
        ),
    };
    let jg = body_jacobian(galg, &split(&q, nb, ng));
    let oracle_group = jg * split(&coord_acc, nb, ng);
    let (t, t1) = body_jets(galg, &split(&q, nb, ng), &split(&dq, nb, ng), &split(&ddq, nb, ng));
    let wrap = |v: DVector<f64>| AlgebraVector::new(galg, v).expect("finite");
    let group_jet = CurveJet::new(wrap(t), wrap(t1), AlgebraVector::zeros(galg), AlgebraVector::zeros(galg));
    let (qb, qg) = covariant_acceleration(bundle, &base_jet, &group_jet).expect("dimensions match");
    (qb - oracle_base).amax().max((qg.coords() - oracle_group).amax())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundles() -> Vec<BundleSpec> {
        let so3xse3 = Algebra::product(&[FactorKind::So3, FactorKind::Se3]).unwrap();
        vec![
            BundleSpec::with_identity_metrics(BaseKind::Euclidean(2), Algebra::so3()).unwrap(),
            BundleSpec::with_identity_metrics(BaseKind::Euclidean(1), Algebra::se3()).unwrap(),
            BundleSpec::with_identity_metrics(BaseKind::CompactGroup(2), Algebra::se3()).unwrap(),
            BundleSpec::with_identity_metrics(BaseKind::Euclidean(1), so3xse3).unwrap(),
        ]
    }

    #[test]
    fn builtin_connections_pass() {
        for b in bundles() {
            let r = identity_suite(&b, 7);
            for c in &r.checks {
                assert!(c.passed, "{}: {} > {}", c.name, c.max_error, c.tolerance);
            }
        }
    }

    #[test]
    fn non_identity_metric_passes() {
        let m = DMatrix::from_row_slice(6, 6, &[
            2.0, 0.1, 0.0, 0.0, 0.2, 0.0,
            0.1, 1.5, 0.0, 0.1, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0, 0.3,
            0.0, 0.1, 0.0, 3.0, 0.0, 0.0,
            0.2, 0.0, 0.0, 0.0, 1.2, 0.0,
            0.0, 0.0, 0.3, 0.0, 0.0, 0.9,
        ]);
        let b = BundleSpec::new(
            BaseKind::Euclidean(2),
            Algebra::se3(),
            MetricSpec::identity(2),
            MetricSpec::new(m).unwrap(),
        )
        .unwrap();
        let r = identity_suite(&b, 11);
        assert!(r.passed, "{:#?}", r.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    }

    #[test]
    fn corrupted_connection_fails_bianchi() {
        let b = BundleSpec::with_identity_metrics(BaseKind::Euclidean(1), Algebra::so3()).unwrap();
        let bad = |x: &AlgebraVector, y: &AlgebraVector| {
            let mut v = bracket_unchecked(x, y) * 0.5;
            // Torsionful, so the cyclic identity no longer holds.
            let extra = 0.3 * x.coords()[0] * y.coords()[1];
            v += AlgebraVector::so3(Vector3::new(extra, 0.0, 0.0));
            v
        };
        let r = identity_suite_with(&b, 3, Some(&bad));
        assert!(!r.check("group:so3:bianchi").unwrap().passed);
        assert!(!r.passed);
    }

    #[test]
    fn deterministic_given_seed() {
        let b = &bundles()[2];
        let a = identity_suite(b, 42);
        let c = identity_suite(b, 42);
        for (x, y) in a.checks.iter().zip(&c.checks) {
            assert_eq!(x.max_error, y.max_error);
        }
    }
}
