//! Boundary-value formulation and solver for minimum-covariant-acceleration
//! interpolation on `Q = M × G`.
//!
//! Unknowns are nodal base values on every segment (Euclidean coordinates,
//! or exponential-chart coordinates `φ` with `R = R̄ₖ exp(φ)` on a compact
//! base). The body velocity follows from `𝔱 = −A(x) ẋ` and the group curve
//! from reconstruction.

mod newton;
mod report;
mod residual;
mod stencil;

pub mod reconstruct;

use nalgebra::DVector;
use serde::Serialize;

use crate::algebra::{AlgebraVector, GroupElement};
use crate::connection::LocalConnection;
use crate::error::{invalid, Result};
use crate::geometry::{BaseKind, BasePoint, BundleSpec};

pub use newton::{hermite_initial_guess, initial_guess, solve, solve_with_guess};
pub use reconstruct::reconstruct_group;
pub use report::{solution_report, SolutionReport};
pub use residual::{
    assemble_residual, cost_of_unknowns, euler_lagrange, trajectory_from_points, ResidualLayout,
};
pub use stencil::fornberg_weights;

pub(crate) use residual::Discretization;

/// A timed configuration `(Tᵢ, xᵢ, gᵢ)`; `g = None` leaves the group free.
#[derive(Clone, Debug)]
pub struct Waypoint {
    pub t: f64,
    pub x: BasePoint,
    pub g: Option<GroupElement>,
}

#[derive(Clone, Debug)]
pub struct InterpolationProblem {
    bundle: BundleSpec,
    connection: LocalConnection,
    waypoints: Vec<Waypoint>,
    v0: DVector<f64>,
    vn: DVector<f64>,
}

impl InterpolationProblem {
    /// Validates the data. `xi0`/`xin`, when given, must agree with
    /// `−A(x) v` at the corresponding endpoint within 1e−8.
    pub fn new(
        bundle: BundleSpec,
        connection: LocalConnection,
        waypoints: Vec<Waypoint>,
        v0: DVector<f64>,
        vn: DVector<f64>,
        xi0: Option<AlgebraVector>,
        xin: Option<AlgebraVector>,
    ) -> Result<Self> {
        if connection.base_dim() != bundle.base_dim() || connection.algebra() != bundle.group() {
            return Err(invalid(format!(
                "connection maps a {}-dimensional base into {}, bundle has a {}-dimensional base and group {}",
                connection.base_dim(),
                connection.algebra(),
                bundle.base_dim(),
                bundle.group()
            )));
        }
        if waypoints.len() < 2 {
            return Err(invalid(format!(
                "need at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !w.t.is_finite() {
                return Err(invalid(format!("waypoint {i}: time is not finite")));
            }
            if i > 0 && w.t <= waypoints[i - 1].t {
                return Err(invalid(format!(
                    "waypoint {i}: time {} does not exceed the previous time {}",
                    w.t,
                    waypoints[i - 1].t
                )));
            }
            match (&w.x, bundle.base()) {
                (BasePoint::Euclidean(x), BaseKind::Euclidean(n)) if x.len() == n => {
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(invalid(format!("waypoint {i}: x is not finite")));
                    }
                }
                (BasePoint::Group(g), BaseKind::CompactGroup(_))
                    if Some(g.algebra()) == bundle.base_algebra() => {}
                _ => {
                    return Err(invalid(format!(
                        "waypoint {i}: base point does not match the bundle's base"
                    )))
                }
            }
            if let Some(g) = &w.g {
                if g.algebra() != bundle.group() {
                    return Err(invalid(format!(
                        "waypoint {i}: group element is in {}, bundle group is {}",
                        g.algebra(),
                        bundle.group()
                    )));
                }
            }
        }
        bundle.check_base_vector(&v0, "v0")?;
        bundle.check_base_vector(&vn, "vN")?;
        let ends = [
            (&waypoints[0].x, &v0, xi0, "xi0"),
            (&waypoints[waypoints.len() - 1].x, &vn, xin, "xiN"),
        ];
        for (x, v, xi, name) in ends {
            if let Some(xi) = xi {
                bundle.check_group_vector(&xi, name)?;
                let derived = crate::connection::constrained_velocity(&connection, x, v)?;
                let gap = (&derived - &xi).amax();
                if gap > 1e-8 {
                    return Err(invalid(format!(
                        "{name} is incompatible with the constraint: differs from -A(x)v by {gap:.3e}"
                    )));
                }
            }
        }
        Ok(Self {
            bundle,
            connection,
            waypoints,
            v0,
            vn,
        })
    }

    pub fn bundle(&self) -> &BundleSpec {
        &self.bundle
    }

    pub fn connection(&self) -> &LocalConnection {
        &self.connection
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn v0(&self) -> &DVector<f64> {
        &self.v0
    }

    pub fn vn(&self) -> &DVector<f64> {
        &self.vn
    }

    pub fn segments(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// Group value at the first waypoint (identity when not given).
    pub fn g0(&self) -> GroupElement {
        self.waypoints[0]
            .g
            .clone()
            .unwrap_or_else(|| GroupElement::identity(self.bundle.group()))
    }

    /// Same problem with every time shifted by `dt`.
    pub fn time_shifted(&self, dt: f64) -> Self {
        let mut p = self.clone();
        for w in &mut p.waypoints {
            w.t += dt;
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "weight")]
pub enum GroupWaypointMode {
    /// Unweighted group rows, least-squares Newton.
    Hard,
    /// Group rows scaled by the weight.
    Soft(f64),
    /// Interior group waypoints ignored.
    Free,
}

/// Which Euler–Lagrange operator is collocated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualForm {
    /// Exact stationarity condition of the cost with `𝔱 = −A(x)ẋ` substituted:
    /// the adjoint form plus the terms produced by the `x`-dependence of `A`
    /// and the non-commutativity of `G`.
    #[default]
    Reduced,
    /// `elastic_base − 𝔸ᵀ elastic_group`.
    Adjoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub nodes_per_segment: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub fd_step: f64,
    /// Connection-jet time step as a fraction of the segment length.
    pub jet_step_fraction: f64,
    /// Reconstruction steps per collocation interval.
    pub integrator_multiplier: usize,
    pub reproject_every: usize,
    pub group_mode: GroupWaypointMode,
    pub form: ResidualForm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nodes_per_segment: 33,
            newton_tol: 1e-9,
            max_newton_iters: 50,
            backtrack: 0.5,
            min_step: 1e-4,
            fd_step: 1e-6,
            jet_step_fraction: 1e-3,
            integrator_multiplier: 4,
            reproject_every: 50,
            group_mode: GroupWaypointMode::Soft(1e3),
            form: ResidualForm::Reduced,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.nodes_per_segment;
        if m < 5 || m.is_multiple_of(2) {
            return Err(invalid(format!(
                "nodes_per_segment must be odd and at least 5, got {m}"
            )));
        }
        let positive = [
            ("newton_tol", self.newton_tol),
            ("fd_step", self.fd_step),
            ("min_step", self.min_step),
            ("jet_step_fraction", self.jet_step_fraction),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if self.min_step > 1.0 {
            return Err(invalid("min_step must not exceed 1"));
        }
        if self.max_newton_iters == 0 || self.integrator_multiplier == 0 {
            return Err(invalid("iteration limits and integrator multiplier must be positive"));
        }
        if let GroupWaypointMode::Soft(w) = self.group_mode {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(format!("soft weight must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Solution samples on the merged grid (junction nodes appear once) plus
/// the nodal unknowns they were computed from.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<BasePoint>,
    /// Base velocity: `ẋ`, or the body velocity `ω` on a compact base.
    pub xdot: Vec<DVector<f64>>,
    pub xi: Vec<AlgebraVector>,
    pub g: Vec<GroupElement>,
    pub cost: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    /// Largest unweighted `‖log(g(Tᵢ)⁻¹ gᵢ)‖∞` over given group waypoints.
    pub group_defect: f64,
    pub config: SolverConfig,
    /// Flat unknown vector, index `(k·m + j)·n + c`.
    pub unknowns: DVector<f64>,
}

impl Trajectory {
    pub fn nodes_per_segment(&self) -> usize {
        self.config.nodes_per_segment
    }
}
