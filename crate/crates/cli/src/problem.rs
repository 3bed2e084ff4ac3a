//! JSON problem files.

use std::path::Path;

use bundle_interp::algebra::{exp_group, Algebra, AlgebraVector, FactorKind, GroupElement, MetricSpec};
use bundle_interp::connection::LocalConnection;
use bundle_interp::geometry::{BaseKind, BasePoint, BundleSpec};
use bundle_interp::interpolator::{
    GroupWaypointMode, InterpolationProblem, ResidualForm, SolverConfig, Waypoint,
};
use bundle_interp::swimmer::{swimmer_bundle, SYSTEM_NAME};
use nalgebra::{DMatrix, DVector, Vector3};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    /// Registered system name; supplies the bundle and the connection.
    pub system: Option<String>,
    pub bundle: Option<BundleSection>,
    pub connection: Option<ConnectionSection>,
    pub waypoints: Vec<WaypointSection>,
    pub boundary: BoundarySection,
    pub solver: Option<SolverSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSection {
    pub base: BaseSection,
    pub group: GroupSection,
    pub base_metric: Option<Vec<Vec<f64>>>,
    pub group_metric: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseSection {
    Euclidean { dim: usize },
    /// `SO(3)^factors`; points are rotation vectors, three per factor.
    So3 { factors: usize },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GroupSection {
    So3,
    Se3,
    Product { factors: Vec<FactorKind> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConnectionSection {
    Zero,
    /// Row-major `dim 𝔤 × dim M` matrix.
    Constant { matrix: Vec<f64> },
    Builtin { builtin: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSection {
    pub t: f64,
    pub x: Vec<f64>,
    /// Row-major group matrices, concatenated over factors.
    pub g: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub v0: Vec<f64>,
    #[serde(rename = "vN")]
    pub vn: Vec<f64>,
    pub xi0: Option<Vec<f64>>,
    #[serde(rename = "xiN")]
    pub xin: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub group_waypoints: Option<ModeName>,
    pub soft_weight: Option<f64>,
    pub form: Option<FormName>,
}

#[derive(Clone, Copy, Debug, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Hard,
    Soft,
    Free,
}

#[derive(Clone, Copy, Debug, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormName {
    Reduced,
    Adjoint,
}

/// A parsed, validated problem with its solver configuration.
#[derive(Debug)]
pub struct LoadedProblem {
    pub problem: InterpolationProblem,
    pub config: SolverConfig,
}

pub fn load(path: &Path, overrides: &SolverSection) -> Result<LoadedProblem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses a problem; `overrides` take precedence over the file's `solver` section.
pub fn parse(text: &str, overrides: &SolverSection) -> Result<LoadedProblem, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        let path = e.path().to_string();
        let at = format!("line {} column {}", inner.line(), inner.column());
        if path == "." {
            CliError::Input(format!("{at}: {inner}"))
        } else {
            CliError::Input(format!("{path} ({at}): {inner}"))
        }
    })?;
    build(&file, overrides)
}

fn field(name: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{name}: {err}"))
}

fn metric(name: &str, rows: &Option<Vec<Vec<f64>>>, dim: usize) -> Result<MetricSpec, CliError> {
    let Some(rows) = rows else {
        return Ok(MetricSpec::identity(dim));
    };
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(field(name, format!("expected a {dim}x{dim} matrix")));
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    MetricSpec::new(m).map_err(|e| field(name, e))
}

fn bundle(section: &BundleSection) -> Result<BundleSpec, CliError> {
    let base = match section.base {
        BaseSection::Euclidean { dim } => BaseKind::Euclidean(dim),
        BaseSection::So3 { factors } => BaseKind::CompactGroup(factors),
    };
    if base.dim() == 0 {
        return Err(field("bundle.base", "dimension must be positive"));
    }
    let group = match &section.group {
        GroupSection::So3 => Algebra::so3(),
        GroupSection::Se3 => Algebra::se3(),
        GroupSection::Product { factors } => {
            Algebra::product(factors).map_err(|e| field("bundle.group.factors", e))?
        }
    };
    if let BaseKind::CompactGroup(k) = base {
        Algebra::so3_power(k).map_err(|e| field("bundle.base.factors", e))?;
    }
    let bm = metric("bundle.base_metric", &section.base_metric, base.dim())?;
    let gm = metric("bundle.group_metric", &section.group_metric, group.dim())?;
    BundleSpec::new(base, group, bm, gm).map_err(|e| field("bundle", e))
}

fn connection(section: &ConnectionSection, spec: &BundleSpec) -> Result<LocalConnection, CliError> {
    match section {
        ConnectionSection::Zero => Ok(LocalConnection::zero(spec.base_dim(), spec.group())),
        ConnectionSection::Constant { matrix } => {
            LocalConnection::constant_row_major(matrix, spec.base_dim(), spec.group())
                .map_err(|e| field("connection.matrix", e))
        }
        ConnectionSection::Builtin { builtin } => match builtin.as_str() {
            "purcell_test" => {
                let c = LocalConnection::purcell_test();
                if c.base_dim() != spec.base_dim() || c.algebra() != spec.group() {
                    return Err(field(
                        "connection.builtin",
                        "purcell_test needs an SO(3)xSO(3) base and group se3",
                    ));
                }
                Ok(c)
            }
            other => Err(field("connection.builtin", format!("unknown builtin connection `{other}`"))),
        },
    }
}

/// Base point from file coordinates: the vector itself, or one rotation
/// vector per SO(3) factor.
pub fn base_point(spec: &BundleSpec, coords: &[f64]) -> Option<BasePoint> {
    if coords.len() != spec.base_dim() || coords.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(match spec.base() {
        BaseKind::Euclidean(_) => BasePoint::Euclidean(DVector::from_column_slice(coords)),
        BaseKind::CompactGroup(_) => {
            let factors = coords
                .chunks(3)
                .flat_map(|w| exp_group(&AlgebraVector::so3(Vector3::new(w[0], w[1], w[2]))).factors().to_vec())
                .collect();
            BasePoint::Group(GroupElement::new(factors).ok()?)
        }
    })
}

fn vector(name: &str, v: &[f64], dim: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != dim {
        return Err(field(name, format!("expected {dim} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(field(name, "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn algebra_vector(name: &str, v: &Option<Vec<f64>>, alg: Algebra) -> Result<Option<AlgebraVector>, CliError> {
    v.as_ref()
        .map(|v| {
            let coords = vector(name, v, alg.dim())?;
            AlgebraVector::new(alg, coords).map_err(|e| field(name, e))
        })
        .transpose()
}

fn build(file: &ProblemFile, overrides: &SolverSection) -> Result<LoadedProblem, CliError> {
    let (spec, conn) = match &file.system {
        Some(name) if name == SYSTEM_NAME => {
            if file.bundle.is_some() {
                return Err(field("bundle", format!("not allowed together with system `{name}`")));
            }
            if file.connection.is_some() {
                return Err(field("connection", format!("not allowed together with system `{name}`")));
            }
            (swimmer_bundle(), LocalConnection::purcell_test())
        }
        Some(name) => return Err(field("system", format!("unknown system `{name}` (known: {SYSTEM_NAME})"))),
        None => {
            let b = file.bundle.as_ref().ok_or_else(|| field("bundle", "missing (or give `system`)"))?;
            let spec = bundle(b)?;
            let c = file
                .connection
                .as_ref()
                .ok_or_else(|| field("connection", "missing (or give `system`)"))?;
            let conn = connection(c, &spec)?;
            (spec, conn)
        }
    };
    if file.waypoints.len() < 2 {
        return Err(field("waypoints", format!("need at least 2, got {}", file.waypoints.len())));
    }
    let mut waypoints = Vec::with_capacity(file.waypoints.len());
    for (i, w) in file.waypoints.iter().enumerate() {
        if !w.t.is_finite() {
            return Err(field(&format!("waypoints[{i}].t"), "must be finite"));
        }
        if i > 0 && w.t <= file.waypoints[i - 1].t {
            return Err(field(
                &format!("waypoints[{i}].t"),
                format!("time {} does not exceed the previous time {}", w.t, file.waypoints[i - 1].t),
            ));
        }
        let x = base_point(&spec, &w.x).ok_or_else(|| {
            field(
                &format!("waypoints[{i}].x"),
                format!("expected {} finite entries, got {}", spec.base_dim(), w.x.len()),
            )
        })?;
        let g = w
            .g
            .as_ref()
            .map(|g| GroupElement::from_row_major(spec.group(), g).map_err(|e| field(&format!("waypoints[{i}].g"), e)))
            .transpose()?;
        waypoints.push(Waypoint { t: w.t, x, g });
    }
    let b = &file.boundary;
    let v0 = vector("boundary.v0", &b.v0, spec.base_dim())?;
    let vn = vector("boundary.vN", &b.vn, spec.base_dim())?;
    let xi0 = algebra_vector("boundary.xi0", &b.xi0, spec.group())?;
    let xin = algebra_vector("boundary.xiN", &b.xin, spec.group())?;
    let problem = InterpolationProblem::new(spec, conn, waypoints, v0, vn, xi0, xin).map_err(|e| field("problem", e))?;
    let empty = SolverSection::default();
    let config = solver_config(file.solver.as_ref().unwrap_or(&empty), overrides)?;
    Ok(LoadedProblem { problem, config })
}

fn solver_config(file: &SolverSection, cli: &SolverSection) -> Result<SolverConfig, CliError> {
    let mut c = SolverConfig::default();
    let soft = cli.soft_weight.or(file.soft_weight);
    if let Some(n) = cli.nodes.or(file.nodes) {
        c.nodes_per_segment = n;
    }
    if let Some(t) = cli.tol.or(file.tol) {
        c.newton_tol = t;
    }
    if let Some(n) = cli.max_iters.or(file.max_iters) {
        c.max_newton_iters = n;
    }
    let default_weight = match c.group_mode {
        GroupWaypointMode::Soft(w) => w,
        _ => 1e3,
    };
    c.group_mode = match cli.group_waypoints.or(file.group_waypoints) {
        Some(ModeName::Hard) => GroupWaypointMode::Hard,
        Some(ModeName::Free) => GroupWaypointMode::Free,
        Some(ModeName::Soft) | None => GroupWaypointMode::Soft(soft.unwrap_or(default_weight)),
    };
    if let Some(f) = cli.form.or(file.form) {
        c.form = match f {
            FormName::Reduced => ResidualForm::Reduced,
            FormName::Adjoint => ResidualForm::Adjoint,
        };
    }
    c.validate().map_err(|e| field("solver", e))?;
    Ok(c)
}
