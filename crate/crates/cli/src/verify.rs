//! Post-hoc audit of a trajectory file against its problem.

use bundle_interp::algebra::{Algebra, GroupElement};
use bundle_interp::geometry::{BaseKind, BundleSpec};
use bundle_interp::interpolator::{trajectory_from_points, GroupWaypointMode};
use bundle_interp::swimmer::swimmer_bundle;
use bundle_interp::validation::{first_variation_check, identity_suite, IdentityReport};
use nalgebra::DVector;
use serde::Serialize;

use crate::problem::{base_point, LoadedProblem};
use crate::trajectory_file::{Columns, Part, TrajectoryFile};
use crate::CliError;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub variations: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub defect_tol: f64,
    pub consistency_tol: f64,
    pub velocity_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            variations: 100,
            epsilon: 1e-4,
            seed: 1,
            defect_tol: 1e-8,
            consistency_tol: 1e-8,
            velocity_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Reported but not counted as a failure.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub advisory: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckItem {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            advisory: false,
            detail: None,
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub checks: Vec<CheckItem>,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<NamedIdentityReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedIdentityReport {
    pub bundle: String,
    #[serde(flatten)]
    pub report: IdentityReport,
}

fn describe(spec: &BundleSpec) -> String {
    let base = match spec.base() {
        BaseKind::Euclidean(n) => format!("R^{n}"),
        BaseKind::CompactGroup(k) => format!("SO(3)^{k}"),
    };
    format!("{base} x {}", spec.group())
}

pub fn identities_for(spec: &BundleSpec, seed: u64) -> NamedIdentityReport {
    NamedIdentityReport {
        bundle: describe(spec),
        report: identity_suite(spec, seed),
    }
}

/// The suites run when no problem is given: so(3), se(3), so(3)×so(3), and
/// the swimmer's compact base.
pub fn default_identity_bundles() -> Vec<BundleSpec> {
    let so3xso3 = Algebra::so3_power(2).expect("two factors");
    [Algebra::so3(), Algebra::se3(), so3xso3]
        .into_iter()
        .map(|g| BundleSpec::with_identity_metrics(BaseKind::Euclidean(2), g).expect("identity metrics"))
        .chain(std::iter::once(swimmer_bundle()))
        .collect()
}

pub fn finish(checks: Vec<CheckItem>, identities: Vec<NamedIdentityReport>) -> VerificationReport {
    let mut failures: Vec<String> = checks.iter().filter(|c| !c.passed && !c.advisory).map(|c| c.name.clone()).collect();
    for r in &identities {
        failures.extend(
            r.report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("identity:{}:{}", r.bundle, c.name)),
        );
    }
    VerificationReport {
        passed: failures.is_empty(),
        checks,
        failures,
        identities,
    }
}

pub fn verify(file: &TrajectoryFile, loaded: &LoadedProblem, opts: &VerifyOptions) -> Result<Vec<CheckItem>, CliError> {
    let problem = &loaded.problem;
    let spec = problem.bundle();
    let cols = file.columns()?;
    let expected = Columns::of(spec);
    if cols != expected {
        return Err(CliError::Input(format!(
            "trajectory has {} base, {} algebra and {} matrix columns; the problem needs {}, {} and {}",
            cols.base, cols.group, cols.matrix, expected.base, expected.group, expected.matrix
        )));
    }
    let nseg = problem.segments();
    let rows = file.rows.len();
    if rows < 2 || !(rows - 1).is_multiple_of(nseg) {
        return Err(CliError::Input(format!(
            "{rows} rows cannot form a grid over {nseg} segments"
        )));
    }
    let m = (rows - 1) / nseg + 1;
    let mut config = loaded.config.clone();
    config.nodes_per_segment = m;

    let mut checks = Vec::new();
    checks.push(
        CheckItem::new("converged", if file.converged == Some(true) { 0.0 } else { 1.0 }, 0.0)
            .detail("#converged trailer"),
    );

    // Grid times.
    let wps = problem.waypoints();
    let mut grid_err: f64 = 0.0;
    for k in 0..nseg {
        let h = (wps[k + 1].t - wps[k].t) / (m - 1) as f64;
        for j in 0..m {
            let t = if j == m - 1 { wps[k + 1].t } else { wps[k].t + j as f64 * h };
            let row = k * (m - 1) + j;
            grid_err = grid_err.max((file.rows[row][0] - t).abs() / (1.0 + t.abs()));
        }
    }
    checks.push(CheckItem::new("grid_times", grid_err, 1e-12));

    let xr = file.column_range(&cols, Part::X);
    let mut points = Vec::with_capacity(rows);
    for (i, row) in file.rows.iter().enumerate() {
        let p = base_point(spec, &row[xr.clone()])
            .ok_or_else(|| CliError::Input(format!("row {}: invalid base point", i + 1)))?;
        points.push(p);
    }

    let mut wp_err: f64 = 0.0;
    for (i, w) in wps.iter().enumerate() {
        let got = points[i * (m - 1)].coords();
        let want = w.x.coords();
        wp_err = wp_err.max(got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    checks.push(CheckItem::new("waypoint_interpolation", wp_err, opts.consistency_tol));

    let vr = file.column_range(&cols, Part::Xdot);
    let ir = file.column_range(&cols, Part::Xi);
    let mut defect: f64 = 0.0;
    let mut worst = 0;
    for (i, row) in file.rows.iter().enumerate() {
        let v = DVector::from_column_slice(&row[vr.clone()]);
        let xi = DVector::from_column_slice(&row[ir.clone()]);
        let a = problem.connection().eval(&points[i]).map_err(CliError::core)?;
        let d = (xi + a * v).amax();
        if d > defect {
            defect = d;
            worst = i;
        }
    }
    checks.push(
        CheckItem::new("constraint_defect", defect, opts.defect_tol)
            .detail(format!("max |xi + A(x) xdot| at row {}, t = {}", worst + 1, file.rows[worst][0])),
    );

    let first = &file.rows[0][vr.clone()];
    let last = &file.rows[rows - 1][vr.clone()];
    let v_err = first
        .iter()
        .zip(problem.v0().iter())
        .chain(last.iter().zip(problem.vn().iter()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(CheckItem::new("end_velocities", v_err, opts.velocity_tol));

    let rebuilt = trajectory_from_points(problem, &config, &points).map_err(CliError::core)?;
    let mut vel_err: f64 = 0.0;
    let mut g_err: f64 = 0.0;
    let gr = file.column_range(&cols, Part::G);
    for (i, row) in file.rows.iter().enumerate() {
        let v = DVector::from_column_slice(&row[vr.clone()]);
        vel_err = vel_err.max((v - &rebuilt.xdot[i]).amax());
        let g = GroupElement::from_row_major(spec.group(), &row[gr.clone()]).map_err(CliError::core)?;
        let diff = g
            .to_row_major()
            .iter()
            .zip(rebuilt.g[i].to_row_major())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        g_err = g_err.max(diff);
    }
    checks.push(CheckItem::new("velocity_consistency", vel_err, opts.velocity_tol));
    checks.push(CheckItem::new("group_reconstruction", g_err, opts.velocity_tol));

    let cost_gap = file
        .cost
        .map(|j| (j - rebuilt.cost).abs() / (1.0 + rebuilt.cost.abs()))
        .unwrap_or(f64::INFINITY);
    checks.push(CheckItem::new("cost", cost_gap, opts.consistency_tol).detail("relative to 1 + J"));

    let audit = first_variation_check(&rebuilt, problem, opts.variations, opts.epsilon, opts.seed)
        .map_err(CliError::core)?;
    let mut item = CheckItem::new("first_variation", audit.max_abs, audit.tolerance).detail(format!(
        "{} variations, epsilon {}, seed {}, J = {}",
        opts.variations, opts.epsilon, opts.seed, audit.cost
    ));
    let group_targets = wps.iter().any(|w| w.g.is_some());
    if group_targets && config.group_mode != GroupWaypointMode::Free {
        // The variations move g(Tᵢ), so they are not admissible for a problem
        // that prescribes it.
        item.advisory = true;
        item.detail = item.detail.map(|d| format!("{d}; advisory: group waypoints are prescribed"));
    }
    checks.push(item);
    Ok(checks)
}
