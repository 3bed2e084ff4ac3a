#![allow(dead_code)]

use bundle_interp::algebra::{exp_group, Algebra, AlgebraVector, GroupElement};
use bundle_interp::connection::LocalConnection;
use bundle_interp::geometry::{BaseKind, BasePoint, BundleSpec};
use bundle_interp::interpolator::{InterpolationProblem, SolverConfig, Waypoint};
use nalgebra::{DVector, Vector3};

pub fn point(x: &[f64]) -> BasePoint {
    BasePoint::Euclidean(DVector::from_column_slice(x))
}

pub fn rotations(angles: &[[f64; 3]]) -> BasePoint {
    let factors = angles
        .iter()
        .flat_map(|a| exp_group(&AlgebraVector::so3(Vector3::new(a[0], a[1], a[2]))).factors().to_vec())
        .collect();
    BasePoint::Group(GroupElement::new(factors).unwrap())
}

pub fn flat_problem(times: &[f64], xs: &[&[f64]], v0: &[f64], vn: &[f64]) -> InterpolationProblem {
    let n = v0.len();
    let spec = BundleSpec::with_identity_metrics(BaseKind::Euclidean(n), Algebra::so3()).unwrap();
    let wps = times
        .iter()
        .zip(xs)
        .map(|(&t, x)| Waypoint { t, x: point(x), g: None })
        .collect();
    InterpolationProblem::new(
        spec,
        LocalConnection::zero(n, Algebra::so3()),
        wps,
        DVector::from_column_slice(v0),
        DVector::from_column_slice(vn),
        None,
        None,
    )
    .unwrap()
}

/// Four waypoints in ℝ² over [0, 3] with clamped end velocities.
pub fn flat_suite_problem() -> InterpolationProblem {
    flat_problem(
        &[0.0, 1.0, 2.0, 3.0],
        &[&[0.0, 0.0], &[1.0, 0.5], &[1.5, -0.5], &[3.0, 0.0]],
        &[1.0, 0.0],
        &[0.5, 0.5],
    )
}

pub const GEODESIC_OMEGA: [f64; 3] = [0.3, -0.5, 0.4];

/// SO(3) base on the one-parameter subgroup `exp(t ω̄)`, zero connection.
pub fn so3_geodesic_problem() -> InterpolationProblem {
    let spec = BundleSpec::with_identity_metrics(BaseKind::CompactGroup(1), Algebra::so3()).unwrap();
    let w = GEODESIC_OMEGA;
    let wps = [0.0, 1.0, 2.5, 3.0]
        .iter()
        .map(|&t| Waypoint { t, x: rotations(&[[w[0] * t, w[1] * t, w[2] * t]]), g: None })
        .collect();
    let v = DVector::from_column_slice(&w);
    InterpolationProblem::new(spec, LocalConnection::zero(3, Algebra::so3()), wps, v.clone(), v, None, None).unwrap()
}

/// Swimmer with the built-in test connection and three shape waypoints.
pub fn swimmer_problem() -> InterpolationProblem {
    let wps = vec![
        Waypoint { t: 0.0, x: rotations(&[[0.0; 3], [0.0; 3]]), g: None },
        Waypoint { t: 1.0, x: rotations(&[[0.4, -0.2, 0.3], [-0.3, 0.5, 0.1]]), g: None },
        Waypoint { t: 2.0, x: rotations(&[[0.1, 0.3, -0.2], [0.2, 0.1, -0.4]]), g: None },
    ];
    InterpolationProblem::new(
        bundle_interp::swimmer::swimmer_bundle(),
        LocalConnection::purcell_test(),
        wps,
        DVector::zeros(6),
        DVector::zeros(6),
        None,
        None,
    )
    .unwrap()
}

/// Resolution used for the swimmer whenever stationarity is audited.
pub fn swimmer_config() -> SolverConfig {
    SolverConfig { nodes_per_segment: 33, ..Default::default() }
}
