use serde::Serialize;

use super::residual::Discretization;
use super::{InterpolationProblem, Trajectory};
use crate::error::Result;

/// Diagnostics of a solved (or partially solved) trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct SolutionReport {
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    /// ∞-norms of the scaled residual blocks.
    pub ode_residual: f64,
    pub waypoint_residual: f64,
    pub velocity_residual: f64,
    pub junction_residual: f64,
    pub group_residual: f64,
    /// `max ‖𝔱 + A(x) ẋ‖∞` over the grid.
    pub constraint_defect: f64,
    /// Unweighted `‖log(g(Tᵢ)⁻¹ gᵢ)‖∞` per given group waypoint.
    pub group_waypoint_defects: Vec<f64>,
    /// Unscaled velocity and acceleration jumps per interior waypoint.
    pub c1_junction_defects: Vec<f64>,
    pub c2_junction_defects: Vec<f64>,
}

pub fn solution_report(trajectory: &Trajectory, problem: &InterpolationProblem) -> Result<SolutionReport> {
    let d = Discretization::new(problem, &trajectory.config)?;
    let u = &trajectory.unknowns;
    let r = d.residual(u)?;
    let block = |range: std::ops::Range<usize>| r.rows(range.start, range.len()).amax();
    let mut constraint_defect: f64 = 0.0;
    for ((x, v), xi) in trajectory.x.iter().zip(&trajectory.xdot).zip(&trajectory.xi) {
        let a = problem.connection().eval(x)?;
        constraint_defect = constraint_defect.max((xi.coords() + a * v).amax());
    }
    let recon = d.reconstruct(u)?;
    let group_waypoint_defects = d.group_defects(&recon)?.iter().map(|g| g.amax()).collect();
    let n = d.n;
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for k in 0..d.nseg.saturating_sub(1) {
        let row = d.layout.junction.start + 2 * k * n;
        c1.push(r.rows(row, n).amax() / d.h[k]);
        c2.push(r.rows(row + n, n).amax() / d.h[k].powi(2));
    }
    Ok(SolutionReport {
        cost: trajectory.cost,
        converged: trajectory.converged,
        iterations: trajectory.iterations,
        residual_norm: trajectory.residual_norm,
        residual_history: trajectory.history.clone(),
        ode_residual: block(d.layout.ode.clone()),
        waypoint_residual: block(d.layout.waypoint.clone()),
        velocity_residual: block(d.layout.velocity.clone()),
        junction_residual: block(d.layout.junction.clone()),
        group_residual: block(d.layout.group.clone()),
        constraint_defect,
        group_waypoint_defects,
        c1_junction_defects: c1,
        c2_junction_defects: c2,
    })
}
