use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::AlgebraVector;
use crate::error::{invalid, Result};
use crate::geometry::chart_velocity;
use crate::interpolator::Discretization;
use crate::interpolator::{InterpolationProblem, SolverConfig, Trajectory};

/// The audit evaluates `𝒥` on a grid this many times finer than the
/// solver's, so quadrature error in the bump's high derivatives does not
/// masquerade as a nonzero first variation.
pub const AUDIT_REFINEMENT: usize = 8;

/// Admissible variation of the base curve: `δx` vanishes (with three
/// derivatives) at every waypoint; the group variation is the induced
/// `𝔰 = −A(x) δx`.
#[derive(Clone, Debug)]
pub struct VariationField {
    /// `δx` in unknown layout (chart coordinates on a compact base).
    pub delta: DVector<f64>,
    /// `𝔰` at the nodes of every segment, segment-major.
    pub induced: Vec<AlgebraVector>,
    /// Per segment and component, the quadratic `p` of a random bump. When
    /// present the audit evaluates `δx` exactly on its refined grid.
    profile: Option<Vec<Vec<[f64; 3]>>>,
}

fn bump(p: &[f64; 3], s: f64) -> f64 {
    (std::f64::consts::PI * s).sin().powi(4) * (p[0] + p[1] * s + p[2] * s * s)
}

impl VariationField {
    /// `δx = sin⁴(π s) p(s)` on every segment, `s ∈ [0, 1]`, with a random
    /// quadratic `p` per component.
    pub fn random(trajectory: &Trajectory, problem: &InterpolationProblem, rng: &mut impl Rng) -> Result<Self> {
        let d = Discretization::new(problem, &trajectory.config)?;
        let profile: Vec<Vec<[f64; 3]>> = (0..d.nseg)
            .map(|_| {
                (0..d.n)
                    .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let mut delta = DVector::zeros(d.n_unknowns());
        for (k, pk) in profile.iter().enumerate() {
            for j in 1..d.m - 1 {
                let s = j as f64 / (d.m - 1) as f64;
                for (c, pc) in pk.iter().enumerate() {
                    delta[d.idx(k, j) + c] = bump(pc, s);
                }
            }
        }
        let mut field = Self::from_delta(trajectory, problem, delta)?;
        field.profile = Some(profile);
        Ok(field)
    }

    pub fn zero(trajectory: &Trajectory, problem: &InterpolationProblem) -> Result<Self> {
        Self::from_delta(trajectory, problem, DVector::zeros(trajectory.unknowns.len()))
    }

    pub fn from_delta(trajectory: &Trajectory, problem: &InterpolationProblem, delta: DVector<f64>) -> Result<Self> {
        let d = Discretization::new(problem, &trajectory.config)?;
        if delta.len() != d.n_unknowns() {
            return Err(invalid("variation has the wrong number of entries"));
        }
        for k in 0..d.nseg {
            for j in [0, d.m - 1] {
                if delta.rows(d.idx(k, j), d.n).amax() != 0.0 {
                    return Err(invalid(format!(
                        "variation does not vanish at a waypoint (segment {k}, node {j})"
                    )));
                }
            }
        }
        let u = &trajectory.unknowns;
        let alg = problem.bundle().group();
        let mut induced = Vec::with_capacity(d.nseg * d.m);
        for k in 0..d.nseg {
            for j in 0..d.m {
                let x = d.node_value(u, k, j);
                let dx = delta.rows(d.idx(k, j), d.n).into_owned();
                let dx = if d.anchors[k].is_some() { chart_velocity(&x, &dx) } else { dx };
                let a = problem.connection().eval(&d.point(k, &x))?;
                induced.push(AlgebraVector::new(alg, -(a * dx))?);
            }
        }
        Ok(Self { delta, induced, profile: None })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationEstimate {
    /// Central difference with step ε.
    pub coarse: f64,
    /// Central difference with step ε/2.
    pub fine: f64,
    /// `(4·fine − coarse)/3`.
    pub extrapolated: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationReport {
    pub cost: f64,
    pub epsilon: f64,
    pub estimates: Vec<VariationEstimate>,
    pub max_abs: f64,
    /// Largest `|fine − coarse|`, a bound on the extrapolation uncertainty.
    pub uncertainty: f64,
    /// `1e−4·(1 + 𝒥)`.
    pub tolerance: f64,
    pub passed: bool,
}

/// `d𝒥/ds` at `s = 0` along `x + s δx` (the group curve follows from the
/// constraint; `𝒥` depends on it only through `𝔱`).
pub fn variation_derivative(
    trajectory: &Trajectory,
    problem: &InterpolationProblem,
    field: &VariationField,
    epsilon: f64,
) -> Result<VariationEstimate> {
    if field.delta.amax() == 0.0 {
        return Ok(VariationEstimate { coarse: 0.0, fine: 0.0, extrapolated: 0.0 });
    }
    let coarse_grid = Discretization::new(problem, &trajectory.config)?;
    let config = refined_config(&trajectory.config);
    let d = Discretization::new(problem, &config)?;
    let u = refine(&coarse_grid, &d, &trajectory.unknowns);
    let delta = match &field.profile {
        Some(profile) => {
            let mut delta = DVector::zeros(d.n_unknowns());
            for (k, pk) in profile.iter().enumerate() {
                for j in 1..d.m - 1 {
                    let s = j as f64 / (d.m - 1) as f64;
                    for (c, pc) in pk.iter().enumerate() {
                        delta[d.idx(k, j) + c] = bump(pc, s);
                    }
                }
            }
            delta
        }
        None => refine(&coarse_grid, &d, &field.delta),
    };
    let j = |s: f64| d.cost(&(&u + &delta * s));
    let coarse = (j(epsilon)? - j(-epsilon)?) / (2.0 * epsilon);
    let fine = (j(epsilon / 2.0)? - j(-epsilon / 2.0)?) / epsilon;
    Ok(VariationEstimate {
        coarse,
        fine,
        extrapolated: (4.0 * fine - coarse) / 3.0,
    })
}

fn refined_config(config: &SolverConfig) -> SolverConfig {
    SolverConfig {
        nodes_per_segment: AUDIT_REFINEMENT * (config.nodes_per_segment - 1) + 1,
        ..config.clone()
    }
}

/// Carries a nodal field onto the refined grid with the solver's own
/// interpolation stencils.
fn refine(coarse: &Discretization<'_>, fine: &Discretization<'_>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(fine.n_unknowns());
    for k in 0..coarse.nseg {
        for j in 0..fine.m {
            let (start, w) = coarse.st.interpolation(j as f64 / AUDIT_REFINEMENT as f64);
            for (i, wi) in w.iter().enumerate() {
                let src = coarse.idx(k, start + i);
                for c in 0..coarse.n {
                    out[fine.idx(k, j) + c] += wi * v[src + c];
                }
            }
        }
    }
    out
}

/// Audits stationarity of `𝒥` over `n_variations` random admissible variations.
pub fn first_variation_check(
    trajectory: &Trajectory,
    problem: &InterpolationProblem,
    n_variations: usize,
    epsilon: f64,
    seed: u64,
) -> Result<VariationReport> {
    if !(1e-6..=1e-2).contains(&epsilon) {
        return Err(invalid(format!("epsilon must lie in [1e-6, 1e-2], got {epsilon}")));
    }
    let coarse_grid = Discretization::new(problem, &trajectory.config)?;
    let config = refined_config(&trajectory.config);
    let d = Discretization::new(problem, &config)?;
    let cost = d.cost(&refine(&coarse_grid, &d, &trajectory.unknowns))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(n_variations);
    for _ in 0..n_variations {
        let field = VariationField::random(trajectory, problem, &mut rng)?;
        estimates.push(variation_derivative(trajectory, problem, &field, epsilon)?);
    }
    let max_abs = estimates.iter().map(|e| e.extrapolated.abs()).fold(0.0, f64::max);
    let uncertainty = estimates.iter().map(|e| (e.fine - e.coarse).abs()).fold(0.0, f64::max);
    let tolerance = 1e-4 * (1.0 + cost);
    Ok(VariationReport {
        cost,
        epsilon,
        estimates,
        max_abs,
        uncertainty,
        tolerance,
        passed: max_abs <= tolerance,
    })
}
