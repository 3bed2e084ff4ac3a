//! Damped Newton / Gauss–Newton on the collocation residual.

use nalgebra::{DMatrix, DVector, Vector3};

use super::residual::Discretization;
use super::{InterpolationProblem, SolverConfig, Trajectory};
use crate::algebra::right_jacobian_so3;
use crate::error::{invalid, Error, Result};
use crate::validation::clamped_spline_oracle;

/// Default starting point: the clamped C² cubic spline through the base
/// waypoints on a Euclidean base; on a compact base, where every segment has
/// its own chart, the per-segment Hermite cubic of [`hermite_initial_guess`].
pub fn initial_guess(problem: &InterpolationProblem, config: &SolverConfig) -> Result<DVector<f64>> {
    let d = Discretization::new(problem, config)?;
    if d.anchors.iter().any(Option::is_some) {
        return Ok(hermite_guess(&d));
    }
    let times: Vec<f64> = problem.waypoints().iter().map(|w| w.t).collect();
    let mut values = d.starts.clone();
    values.push(d.ends[d.nseg - 1].clone());
    let spline = clamped_spline_oracle(&times, &values, problem.v0(), problem.vn())?;
    let mut u = DVector::zeros(d.n_unknowns());
    for k in 0..d.nseg {
        for j in 0..d.m {
            let t = times[k] + d.h[k] * j as f64;
            u.rows_mut(d.idx(k, j), d.n).copy_from(&spline.eval_in(k, t, 0));
        }
    }
    Ok(u)
}

/// Hermite cubic per segment through the waypoints, with the prescribed end
/// velocities and averaged secant velocities at interior waypoints. Only C¹,
/// so Newton has real work to do even on flat problems.
pub fn hermite_initial_guess(problem: &InterpolationProblem, config: &SolverConfig) -> Result<DVector<f64>> {
    let d = Discretization::new(problem, config)?;
    Ok(hermite_guess(&d))
}

fn hermite_guess(d: &Discretization<'_>) -> DVector<f64> {
    let nseg = d.nseg;
    // Secant velocity of every segment (body velocity of the chart geodesic).
    let secant: Vec<DVector<f64>> = (0..nseg).map(|k| (&d.ends[k] - &d.starts[k]) / d.len[k]).collect();
    let mut wp_vel = Vec::with_capacity(nseg + 1);
    wp_vel.push(d.p.v0().clone());
    for k in 1..nseg {
        wp_vel.push((&secant[k - 1] + &secant[k]) * 0.5);
    }
    wp_vel.push(d.p.vn().clone());
    let mut u = DVector::zeros(d.n_unknowns());
    for k in 0..nseg {
        let l = d.len[k];
        let m0 = wp_vel[k].clone();
        let mut m1 = wp_vel[k + 1].clone();
        if d.anchors[k].is_some() {
            // Body velocity ω at the segment end corresponds to φ̇ = J_r(Δ)⁻¹ ω.
            for off in (0..d.n).step_by(3) {
                let delta = Vector3::new(d.ends[k][off], d.ends[k][off + 1], d.ends[k][off + 2]);
                let w = Vector3::new(m1[off], m1[off + 1], m1[off + 2]);
                let jr = right_jacobian_so3(&delta);
                let phidot = jr.lu().solve(&w).unwrap_or(w);
                m1.fixed_rows_mut::<3>(off).copy_from(&phidot);
            }
        }
        for j in 0..d.m {
            let s = j as f64 / (d.m - 1) as f64;
            let (s2, s3) = (s * s, s * s * s);
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            let v = &d.starts[k] * h00 + &m0 * (h10 * l) + &d.ends[k] * h01 + &m1 * (h11 * l);
            u.rows_mut(d.idx(k, j), d.n).copy_from(&v);
        }
    }
    u
}

pub fn solve(problem: &InterpolationProblem, config: &SolverConfig) -> Result<Trajectory> {
    let guess = initial_guess(problem, config)?;
    solve_with_guess(problem, config, &guess)
}

fn merit(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

fn newton_step(jac: DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = -r;
    if jac.nrows() == jac.ncols() {
        if let Some(s) = jac.clone().lu().solve(&rhs) {
            if s.iter().all(|v| v.is_finite()) {
                return Some(s);
            }
        }
        return jac.svd(true, true).solve(&rhs, 1e-13).ok();
    }
    let qr = jac.clone().qr();
    let qtr = qr.q().tr_mul(&rhs);
    match qr.r().solve_upper_triangular(&qtr) {
        Some(s) if s.iter().all(|v| v.is_finite()) => Some(s),
        _ => jac.svd(true, true).solve(&rhs, 1e-13).ok(),
    }
}

/// Damped Newton with an Armijo backtracking line search on `½‖r‖²`.
fn newton(
    d: &Discretization<'_>,
    config: &SolverConfig,
    u: &mut DVector<f64>,
    r: &mut DVector<f64>,
    history: &mut Vec<f64>,
    iterations: &mut usize,
) -> Result<bool> {
    let mut converged = r.amax() <= config.newton_tol;
    while !converged && *iterations < config.max_newton_iters {
        *iterations += 1;
        let jac = d.jacobian(u, r)?;
        let Some(step) = newton_step(jac, r) else {
            break;
        };
        let f0 = merit(r);
        let mut alpha = 1.0;
        loop {
            let trial = &*u + &step * alpha;
            let accepted = match d.residual(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => {
                    (merit(&rt) <= (1.0 - 1e-4 * alpha) * f0 || alpha <= config.min_step).then_some(rt)
                }
                _ => None,
            };
            if let Some(rt) = accepted {
                *u = trial;
                *r = rt;
                break;
            }
            if alpha <= config.min_step {
                return Err(Error::Domain("residual undefined along the Newton direction".into()));
            }
            alpha = (alpha * config.backtrack).max(config.min_step);
        }
        history.push(r.amax());
        converged = r.amax() <= config.newton_tol;
    }
    Ok(converged)
}

/// Levenberg–Marquardt for the overdetermined system with group rows. The
/// damped step solves `[J; √λ D] δ ≈ [−r; 0]` by QR. The waypoint rows are
/// linear in the segment end nodes, so those unknowns are pinned to the
/// waypoints and left out of the step: the base interpolates exactly and only
/// the smoothness rows trade off against the group rows. Converged when the
/// residual meets the tolerance or an accepted step is negligible.
fn levenberg_marquardt(
    d: &Discretization<'_>,
    config: &SolverConfig,
    u: &mut DVector<f64>,
    r: &mut DVector<f64>,
    history: &mut Vec<f64>,
    iterations: &mut usize,
) -> Result<bool> {
    let n = d.n;
    let mut pinned = vec![false; u.len()];
    for k in 0..d.nseg {
        for (j, target) in [(0, &d.starts[k]), (d.m - 1, &d.ends[k])] {
            let at = d.idx(k, j);
            u.rows_mut(at, n).copy_from(target);
            pinned[at..at + n].iter_mut().for_each(|p| *p = true);
        }
    }
    *r = d.residual(u)?;
    let free: Vec<usize> = (0..u.len()).filter(|&c| !pinned[c]).collect();
    let nu = free.len();
    let nr = r.len();
    let mut lambda: f64 = 1e-3;
    let mut converged = r.amax() <= config.newton_tol;
    while !converged && *iterations < config.max_newton_iters {
        *iterations += 1;
        let jac = d.jacobian(u, r)?.select_columns(&free);
        let scale: Vec<f64> = (0..nu).map(|c| jac.column(c).norm().max(1e-12)).collect();
        let f0 = merit(r);
        let mut accepted = false;
        for _ in 0..30 {
            let mut aug = DMatrix::zeros(nr + nu, nu);
            aug.rows_mut(0, nr).copy_from(&jac);
            for c in 0..nu {
                aug[(nr + c, c)] = lambda.sqrt() * scale[c];
            }
            let mut rhs = DVector::zeros(nr + nu);
            rhs.rows_mut(0, nr).copy_from(&-&*r);
            let qr = aug.qr();
            let Some(reduced) = qr.r().solve_upper_triangular(&qr.q().tr_mul(&rhs)) else {
                lambda *= 10.0;
                continue;
            };
            let mut step = DVector::zeros(u.len());
            for (i, &c) in free.iter().enumerate() {
                step[c] = reduced[i];
            }
            let trial = &*u + &step;
            match d.residual(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) && merit(&rt) < f0 => {
                    let small = step.amax() <= 1e-9 * (1.0 + u.amax());
                    *u = trial;
                    *r = rt;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    converged = r.amax() <= config.newton_tol || small;
                    break;
                }
                _ => {
                    if step.amax() <= 1e-12 * (1.0 + u.amax()) {
                        // No representable descent left: a least-squares minimum.
                        converged = true;
                        break;
                    }
                    lambda *= 4.0;
                }
            }
        }
        history.push(r.amax());
        if !accepted {
            break;
        }
    }
    Ok(converged)
}

/// Newton from a caller-supplied unknown vector (layout `(k·m + j)·n + c`).
pub fn solve_with_guess(
    problem: &InterpolationProblem,
    config: &SolverConfig,
    guess: &DVector<f64>,
) -> Result<Trajectory> {
    let d = Discretization::new(problem, config)?;
    if guess.len() != d.n_unknowns() {
        return Err(invalid(format!(
            "initial guess has {} entries, expected {}",
            guess.len(),
            d.n_unknowns()
        )));
    }
    let mut u = guess.clone();
    let mut r = d.residual(&u)?;
    let mut history = vec![r.amax()];
    let mut iterations = 0;
    let converged = if d.layout.group.is_empty() {
        newton(&d, config, &mut u, &mut r, &mut history, &mut iterations)?
    } else {
        levenberg_marquardt(&d, config, &mut u, &mut r, &mut history, &mut iterations)?
    };
    let norm = r.amax();
    let traj = d.build_trajectory(&u, iterations, converged, history.clone(), norm)?;
    if converged {
        Ok(traj)
    } else {
        Err(Error::Convergence {
            iterations,
            residual: norm,
            trajectory: Box::new(traj),
            history,
        })
    }
}
