//! Collocation residual of the extremal equations on a multi-segment grid.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Vector3};

use super::stencil::SegmentStencils;
use super::{GroupWaypointMode, InterpolationProblem, ResidualForm, SolverConfig, Trajectory};
use crate::algebra::{
    ad_transpose_unchecked, log_group, log_so3, AlgebraVector, GroupElement, LieConnection,
};
use crate::connection::{adjoint_matrix_apply, connection_jet, LocalConnection};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    chart_point, chart_velocity, cost_functional, elastic_base_unchecked, elastic_group_with,
    BaseJet, BasePoint, BundleSpec, CurveJet, Quadrature, SampledSegment,
};

/// Euler–Lagrange operator at one time, from the base jet `x, …, x⁗`
/// (chart coordinates on a compact base).
///
/// `Adjoint`: `elastic_base − G_M⁻¹ Aᵀ 𝕀 E` with `E` the group elastic term
/// of `𝔱 = −A(x)ẋ`.
///
/// `Reduced`: stationarity of `½∫ |∇ẋ|² + |𝔱̇ + ∇_𝔱𝔱|²` under variations of
/// `x` alone. With `a = 𝔱̇ + ∇_𝔱𝔱`, `L_𝔱η = ∇_η𝔱 + ∇_𝔱η` and
/// `μ = −ȧ + L_𝔱^† a` (so that `E = −μ̇ + ad_𝔱^† μ`), it reads
/// `elastic_base + G_M⁻¹[−Aᵀ𝕀E + Aᵀ ad_𝔱ᵀ 𝕀μ + (Ȧ − K)ᵀ 𝕀μ (+ ω × Aᵀ𝕀μ)]`
/// where `Ȧ = ∂A[ẋ]`, `K w = ∂A[w] ẋ`, and the bracketed last term appears
/// only on a compact base.
pub fn euler_lagrange(
    bundle: &BundleSpec,
    conn: &LocalConnection,
    jet: &BaseJet,
    h_fd: f64,
    form: ResidualForm,
) -> Result<DVector<f64>> {
    if jet.dim() != bundle.base_dim() {
        return Err(invalid(format!(
            "euler_lagrange: jet has dimension {}, base has dimension {}",
            jet.dim(),
            bundle.base_dim()
        )));
    }
    let vel = jet.velocity_jet();
    let mut out = elastic_base_unchecked(bundle, &vel);
    if conn.is_zero() {
        return Ok(out);
    }
    let t = connection_jet(conn, jet, h_fd)?;
    let point = jet.point();
    let a = conn.eval(&point)?;
    let gconn = bundle.group_connection();
    let gm = bundle.group_metric();
    let e = elastic_group_with(&gconn, &t);
    match form {
        ResidualForm::Adjoint => {
            out -= adjoint_matrix_apply(&a, bundle.base_metric(), gm, e.coords());
        }
        ResidualForm::Reduced => {
            let mu_low = reduced_momentum(&gconn, gm, &t);
            let alg = bundle.group();
            let mu_low_v = AlgebraVector::from_raw(alg, mu_low.clone());
            let mut rhs = a.tr_mul(&(ad_transpose_unchecked(&t.value, &mu_low_v).into_coords() - gm.lower(e.coords())));
            if !conn.is_constant() {
                let v = &vel.value;
                for (j, d) in conn.coordinate_derivatives(&point)?.iter().enumerate() {
                    rhs += d.tr_mul(&mu_low) * v[j];
                    rhs[j] -= (d * v).dot(&mu_low);
                }
            }
            if bundle.base_algebra().is_some() {
                let c = a.tr_mul(&mu_low);
                for off in (0..c.len()).step_by(3) {
                    let w = Vector3::new(vel.value[off], vel.value[off + 1], vel.value[off + 2]);
                    let cb = Vector3::new(c[off], c[off + 1], c[off + 2]);
                    let wc = w.cross(&cb);
                    for i in 0..3 {
                        rhs[off + i] += wc[i];
                    }
                }
            }
            out += bundle.base_metric().raise(&rhs);
        }
    }
    Ok(out)
}

/// `𝕀μ` with `μ = −ȧ + L_𝔱^† a`.
pub(crate) fn reduced_momentum(
    gconn: &LieConnection<'_>,
    gm: &crate::algebra::MetricSpec,
    t: &CurveJet<AlgebraVector>,
) -> DVector<f64> {
    let alg = gconn.algebra();
    let acc = &t.d1 + &gconn.cov(&t.value, &t.value);
    let acc_dot = &t.d2 + &gconn.cov(&t.d1, &t.value) + gconn.cov(&t.value, &t.d1);
    let acc_low = gm.lower(acc.coords());
    let mut mu_low = -gm.lower(acc_dot.coords());
    for j in 0..alg.dim() {
        let mut ej = DVector::zeros(alg.dim());
        ej[j] = 1.0;
        let ej = AlgebraVector::from_raw(alg, ej);
        let l = gconn.cov(&ej, &t.value) + gconn.cov(&t.value, &ej);
        mu_low[j] += acc_low.dot(l.coords());
    }
    mu_low
}

/// Row ranges of the residual vector, in assembly order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualLayout {
    /// Extremal equation at nodes `2..=m−3` of every segment, scaled by `h⁴`.
    pub ode: Range<usize>,
    /// `x(Tₖ)` and `x(Tₖ₊₁)` for every segment.
    pub waypoint: Range<usize>,
    /// Endpoint velocities, scaled by `h`.
    pub velocity: Range<usize>,
    /// Per interior waypoint: C¹ rows (× h) then C² rows (× h²).
    pub junction: Range<usize>,
    /// Weighted `log(g(Tᵢ)⁻¹ gᵢ)` rows; empty in free mode.
    pub group: Range<usize>,
}

impl ResidualLayout {
    pub fn len(&self) -> usize {
        self.group.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) struct Discretization<'a> {
    pub p: &'a InterpolationProblem,
    pub cfg: &'a SolverConfig,
    pub m: usize,
    pub n: usize,
    pub nseg: usize,
    pub st: SegmentStencils,
    pub h: Vec<f64>,
    pub len: Vec<f64>,
    /// Chart anchors `R̄ₖ` on a compact base.
    pub anchors: Vec<Option<GroupElement>>,
    pub starts: Vec<DVector<f64>>,
    pub ends: Vec<DVector<f64>>,
    pub group_targets: Vec<(usize, GroupElement)>,
    pub group_weight: Option<f64>,
    pub layout: ResidualLayout,
    interp: Vec<(usize, Vec<f64>)>,
}

fn so3_log_coords(g: &GroupElement, what: &str) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(3 * g.factors().len());
    for (i, f) in g.factors().iter().enumerate() {
        let w = log_so3(&f.rotation())
            .map_err(|e| Error::Domain(format!("{what}: {e}")))?;
        out.fixed_rows_mut::<3>(3 * i).copy_from(&w);
    }
    Ok(out)
}

impl<'a> Discretization<'a> {
    pub fn new(p: &'a InterpolationProblem, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.nodes_per_segment;
        let n = p.bundle().base_dim();
        let nseg = p.segments();
        let wps = p.waypoints();
        let len: Vec<f64> = wps.windows(2).map(|w| w[1].t - w[0].t).collect();
        let h: Vec<f64> = len.iter().map(|l| l / (m - 1) as f64).collect();
        let mut anchors = Vec::with_capacity(nseg);
        let mut starts = Vec::with_capacity(nseg);
        let mut ends = Vec::with_capacity(nseg);
        for k in 0..nseg {
            match (&wps[k].x, &wps[k + 1].x) {
                (BasePoint::Euclidean(a), BasePoint::Euclidean(b)) => {
                    anchors.push(None);
                    starts.push(a.clone());
                    ends.push(b.clone());
                }
                (BasePoint::Group(a), BasePoint::Group(b)) => {
                    let rel = &a.inverse() * b;
                    let what = format!("waypoints {k} and {}", k + 1);
                    ends.push(so3_log_coords(&rel, &what)?);
                    starts.push(DVector::zeros(n));
                    anchors.push(Some(a.clone()));
                }
                _ => return Err(invalid("waypoint base points of mixed kinds")),
            }
        }
        // ODE rows carry h⁴; the extra (h/L)⁴ puts the group rows on the
        // scale of the unscaled extremal equation times L⁴, independent of
        // the grid.
        let grid = (1.0 / (m - 1) as f64).powi(4);
        let group_weight = match cfg.group_mode {
            GroupWaypointMode::Hard => Some(grid),
            GroupWaypointMode::Soft(w) => Some(w * grid),
            GroupWaypointMode::Free => None,
        };
        let group_targets: Vec<(usize, GroupElement)> = wps
            .iter()
            .enumerate()
            .skip(1)
            .filter_map(|(i, w)| w.g.clone().map(|g| (i, g)))
            .collect();
        let gdim = p.bundle().group().dim();
        let ode = 0..nseg * (m - 4) * n;
        let waypoint = ode.end..ode.end + 2 * nseg * n;
        let velocity = waypoint.end..waypoint.end + 2 * n;
        let junction = velocity.end..velocity.end + 2 * (nseg - 1) * n;
        let ngroup = if group_weight.is_some() {
            group_targets.len() * gdim
        } else {
            0
        };
        let group = junction.end..junction.end + ngroup;
        let st = SegmentStencils::new(m);
        let mult = cfg.integrator_multiplier;
        let interp = (0..=2 * mult * (m - 1))
            .map(|i| st.interpolation(i as f64 / (2 * mult) as f64))
            .collect();
        Ok(Self {
            p,
            cfg,
            m,
            n,
            nseg,
            st,
            h,
            len,
            anchors,
            starts,
            ends,
            group_targets,
            group_weight,
            layout: ResidualLayout {
                ode,
                waypoint,
                velocity,
                junction,
                group,
            },
            interp,
        })
    }

    pub fn n_unknowns(&self) -> usize {
        self.nseg * self.m * self.n
    }

    pub fn idx(&self, k: usize, j: usize) -> usize {
        (k * self.m + j) * self.n
    }

    pub fn node_value(&self, u: &DVector<f64>, k: usize, j: usize) -> DVector<f64> {
        u.rows(self.idx(k, j), self.n).into_owned()
    }

    pub fn derivs(&self, u: &DVector<f64>, k: usize, j: usize) -> [DVector<f64>; 5] {
        let st = &self.st.nodes[j];
        let hk = self.h[k];
        std::array::from_fn(|d| {
            let mut acc = DVector::zeros(self.n);
            for (i, w) in st.weights[d].iter().enumerate() {
                acc.axpy(*w, &u.rows(self.idx(k, st.start + i), self.n), 1.0);
            }
            acc / hk.powi(d as i32)
        })
    }

    pub fn base_jet(&self, u: &DVector<f64>, k: usize, j: usize) -> BaseJet {
        let derivs = self.derivs(u, k, j);
        match &self.anchors[k] {
            None => BaseJet::Euclidean { derivs },
            Some(anchor) => BaseJet::Chart {
                anchor: anchor.clone(),
                derivs,
            },
        }
    }

    pub fn point(&self, k: usize, value: &DVector<f64>) -> BasePoint {
        match &self.anchors[k] {
            None => BasePoint::Euclidean(value.clone()),
            Some(anchor) => BasePoint::Group(chart_point(anchor, value)),
        }
    }

    /// Base point and base velocity at a node (only first derivatives needed).
    pub fn point_velocity(&self, u: &DVector<f64>, k: usize, j: usize) -> (BasePoint, DVector<f64>) {
        let st = &self.st.nodes[j];
        let mut d1 = DVector::zeros(self.n);
        for (i, w) in st.weights[1].iter().enumerate() {
            d1.axpy(*w, &u.rows(self.idx(k, st.start + i), self.n), 1.0);
        }
        d1 /= self.h[k];
        let x = self.node_value(u, k, j);
        let v = match self.anchors[k] {
            None => d1,
            Some(_) => chart_velocity(&x, &d1),
        };
        (self.point(k, &x), v)
    }

    pub fn h_fd(&self, k: usize) -> f64 {
        self.cfg.jet_step_fraction * self.len[k]
    }

    pub fn ode_rows(&self, u: &DVector<f64>, k: usize, j: usize) -> Result<DVector<f64>> {
        let jet = self.base_jet(u, k, j);
        let r = euler_lagrange(self.p.bundle(), self.p.connection(), &jet, self.h_fd(k), self.cfg.form)?;
        Ok(r * self.h[k].powi(4))
    }

    fn ode_row_index(&self, k: usize, j: usize) -> usize {
        self.layout.ode.start + (k * (self.m - 4) + (j - 2)) * self.n
    }

    /// Base velocity and acceleration (body quantities on a compact base).
    fn velocity_acceleration(&self, u: &DVector<f64>, k: usize, j: usize) -> (DVector<f64>, DVector<f64>) {
        let v = self.base_jet(u, k, j).velocity_jet();
        (v.value, v.d1)
    }

    /// Waypoint, velocity and junction rows into `out[waypoint.start..junction.end]`.
    pub fn boundary_rows(&self, u: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.n;
        let last = self.m - 1;
        let mut row = self.layout.waypoint.start;
        let mut put = |out: &mut DVector<f64>, v: DVector<f64>| {
            out.rows_mut(row, n).copy_from(&v);
            row += n;
        };
        for k in 0..self.nseg {
            put(out, self.node_value(u, k, 0) - &self.starts[k]);
            put(out, self.node_value(u, k, last) - &self.ends[k]);
        }
        let ends: Vec<_> = (0..self.nseg)
            .map(|k| (self.velocity_acceleration(u, k, 0), self.velocity_acceleration(u, k, last)))
            .collect();
        put(out, (&ends[0].0 .0 - self.p.v0()) * self.h[0]);
        let kl = self.nseg - 1;
        put(out, (&ends[kl].1 .0 - self.p.vn()) * self.h[kl]);
        for k in 0..kl {
            let ((v_l, a_l), (v_r, a_r)) = (&ends[k].1, &ends[k + 1].0);
            put(out, (v_l - v_r) * self.h[k]);
            put(out, (a_l - a_r) * self.h[k].powi(2));
        }
    }

    /// `𝔱` at every node of segment `k`.
    pub fn segment_xi(&self, u: &DVector<f64>, k: usize) -> Result<Vec<AlgebraVector>> {
        let alg = self.p.bundle().group();
        (0..self.m)
            .map(|j| {
                if self.p.connection().is_zero() {
                    return Ok(AlgebraVector::zeros(alg));
                }
                let (x, v) = self.point_velocity(u, k, j);
                let a = self.p.connection().eval(&x)?;
                Ok(AlgebraVector::from_raw(alg, -(a * v)))
            })
            .collect()
    }

    /// Group values at every node of every segment.
    pub fn reconstruct(&self, u: &DVector<f64>) -> Result<Vec<Vec<GroupElement>>> {
        let mult = self.cfg.integrator_multiplier;
        let alg = self.p.bundle().group();
        let mut g = self.p.g0();
        let mut out = Vec::with_capacity(self.nseg);
        for k in 0..self.nseg {
            let xi = self.segment_xi(u, k)?;
            let samples: Vec<AlgebraVector> = self
                .interp
                .iter()
                .map(|(start, w)| {
                    let mut c = DVector::zeros(alg.dim());
                    for (i, wi) in w.iter().enumerate() {
                        c.axpy(*wi, xi[start + i].coords(), 1.0);
                    }
                    AlgebraVector::from_raw(alg, c)
                })
                .collect();
            let dt = self.len[k] / (mult * (self.m - 1)) as f64;
            let all = super::reconstruct_group(&g, &samples, dt, self.cfg.reproject_every)?;
            let nodes: Vec<GroupElement> = all.into_iter().step_by(mult).collect();
            g = nodes[self.m - 1].clone();
            out.push(nodes);
        }
        Ok(out)
    }

    /// Unweighted `log(g(Tᵢ)⁻¹ gᵢ)` for every given group waypoint.
    pub fn group_defects(&self, recon: &[Vec<GroupElement>]) -> Result<Vec<AlgebraVector>> {
        self.group_targets
            .iter()
            .map(|(i, gi)| {
                let g = &recon[i - 1][self.m - 1];
                log_group(&(&g.inverse() * gi))
                    .map_err(|e| Error::Domain(format!("group waypoint {i}: {e}")))
            })
            .collect()
    }

    pub fn group_rows(&self, u: &DVector<f64>, out: &mut DVector<f64>) -> Result<()> {
        let Some(w) = self.group_weight else {
            return Ok(());
        };
        if self.group_targets.is_empty() {
            return Ok(());
        }
        let recon = self.reconstruct(u)?;
        let mut row = self.layout.group.start;
        for d in self.group_defects(&recon)? {
            let dim = d.dim();
            out.rows_mut(row, dim).copy_from(&(d.into_coords() * w));
            row += dim;
        }
        Ok(())
    }

    pub fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let mut r = DVector::zeros(self.layout.len());
        for k in 0..self.nseg {
            for j in 2..=self.m - 3 {
                let row = self.ode_row_index(k, j);
                r.rows_mut(row, self.n).copy_from(&self.ode_rows(u, k, j)?);
            }
        }
        self.boundary_rows(u, &mut r);
        self.group_rows(u, &mut r)?;
        Ok(r)
    }

    /// Central-difference Jacobian; each column only re-evaluates the
    /// collocation rows whose stencils see the perturbed node. (A one-sided
    /// difference is not accurate enough once the conditioning of the
    /// fourth-order collocation system is factored in.)
    pub fn jacobian(&self, u: &DVector<f64>, r0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let nu = self.n_unknowns();
        let nr = self.layout.len();
        let mut jac = DMatrix::zeros(nr, nu);
        let mut up = u.clone();
        let mut um = u.clone();
        let mut sp = r0.clone();
        let mut sm = r0.clone();
        let bnd = self.layout.waypoint.start..self.layout.junction.end;
        let has_group = !self.layout.group.is_empty();
        for k in 0..self.nseg {
            for j in 0..self.m {
                for c in 0..self.n {
                    let col = self.idx(k, j) + c;
                    let step = self.cfg.fd_step * u[col].abs().max(1.0);
                    up[col] = u[col] + step;
                    um[col] = u[col] - step;
                    let inv = 1.0 / (up[col] - um[col]);
                    for jj in 2..=self.m - 3 {
                        if !self.st.nodes[jj].contains(j) {
                            continue;
                        }
                        let row = self.ode_row_index(k, jj);
                        let vp = self.ode_rows(&up, k, jj)?;
                        let vm = self.ode_rows(&um, k, jj)?;
                        for i in 0..self.n {
                            jac[(row + i, col)] = (vp[i] - vm[i]) * inv;
                        }
                    }
                    self.boundary_rows(&up, &mut sp);
                    self.boundary_rows(&um, &mut sm);
                    for row in bnd.clone() {
                        jac[(row, col)] = (sp[row] - sm[row]) * inv;
                    }
                    if has_group {
                        self.group_rows(&up, &mut sp)?;
                        self.group_rows(&um, &mut sm)?;
                        for row in self.layout.group.clone() {
                            jac[(row, col)] = (sp[row] - sm[row]) * inv;
                        }
                    }
                    up[col] = u[col];
                    um[col] = u[col];
                }
            }
        }
        Ok(jac)
    }

    pub fn cost(&self, u: &DVector<f64>) -> Result<f64> {
        let conn = self.p.connection();
        let alg = self.p.bundle().group();
        let mut segs = Vec::with_capacity(self.nseg);
        for k in 0..self.nseg {
            let mut base = Vec::with_capacity(self.m);
            let mut group = Vec::with_capacity(self.m);
            for j in 0..self.m {
                let jet = self.base_jet(u, k, j);
                base.push(jet.velocity_jet());
                group.push(if conn.is_zero() {
                    CurveJet::<AlgebraVector>::zeros(alg)
                } else {
                    connection_jet(conn, &jet, self.h_fd(k))?
                });
            }
            segs.push(SampledSegment {
                step: self.h[k],
                base,
                group,
            });
        }
        cost_functional(self.p.bundle(), &segs, Quadrature::Simpson)
    }

    /// Unknown vector from base points on the merged grid.
    pub fn unknowns_from_points(&self, points: &[BasePoint]) -> Result<DVector<f64>> {
        let expected = self.nseg * (self.m - 1) + 1;
        if points.len() != expected {
            return Err(invalid(format!(
                "expected {expected} samples for {} segments of {} nodes, got {}",
                self.nseg,
                self.m,
                points.len()
            )));
        }
        let mut u = DVector::zeros(self.n_unknowns());
        for k in 0..self.nseg {
            for j in 0..self.m {
                let value = match (&points[k * (self.m - 1) + j], &self.anchors[k]) {
                    (BasePoint::Euclidean(x), None) if x.len() == self.n => x.clone(),
                    (BasePoint::Group(g), Some(anchor))
                        if 3 * g.factors().len() == self.n =>
                    {
                        so3_log_coords(&(&anchor.inverse() * g), &format!("sample {j} of segment {k}"))?
                    }
                    _ => return Err(invalid(format!("sample {j} of segment {k} does not match the base"))),
                };
                u.rows_mut(self.idx(k, j), self.n).copy_from(&value);
            }
        }
        Ok(u)
    }

    pub fn build_trajectory(
        &self,
        u: &DVector<f64>,
        iterations: usize,
        converged: bool,
        history: Vec<f64>,
        residual_norm: f64,
    ) -> Result<Trajectory> {
        let recon = self.reconstruct(u)?;
        let group_defect = self
            .group_defects(&recon)?
            .iter()
            .map(|d| d.amax())
            .fold(0.0, f64::max);
        let mut traj = Trajectory {
            times: Vec::new(),
            x: Vec::new(),
            xdot: Vec::new(),
            xi: Vec::new(),
            g: Vec::new(),
            cost: self.cost(u)?,
            residual_norm,
            iterations,
            converged,
            history,
            group_defect,
            config: self.cfg.clone(),
            unknowns: u.clone(),
        };
        let wps = self.p.waypoints();
        for k in 0..self.nseg {
            let xi = self.segment_xi(u, k)?;
            for j in usize::from(k > 0)..self.m {
                let (x, v) = self.point_velocity(u, k, j);
                traj.times.push(if j == self.m - 1 {
                    wps[k + 1].t
                } else {
                    wps[k].t + j as f64 * self.h[k]
                });
                traj.x.push(x);
                traj.xdot.push(v);
                traj.xi.push(xi[j].clone());
                traj.g.push(recon[k][j].clone());
            }
        }
        Ok(traj)
    }
}

/// Residual vector for a flat unknown vector (layout `(k·m + j)·n + c`).
pub fn assemble_residual(
    problem: &InterpolationProblem,
    config: &SolverConfig,
    unknowns: &DVector<f64>,
) -> Result<(DVector<f64>, ResidualLayout)> {
    let d = Discretization::new(problem, config)?;
    if unknowns.len() != d.n_unknowns() {
        return Err(invalid(format!(
            "expected {} unknowns, got {}",
            d.n_unknowns(),
            unknowns.len()
        )));
    }
    Ok((d.residual(unknowns)?, d.layout.clone()))
}

/// Discrete cost `𝒥` of a flat unknown vector.
pub fn cost_of_unknowns(
    problem: &InterpolationProblem,
    config: &SolverConfig,
    unknowns: &DVector<f64>,
) -> Result<f64> {
    let d = Discretization::new(problem, config)?;
    if unknowns.len() != d.n_unknowns() {
        return Err(invalid(format!(
            "expected {} unknowns, got {}",
            d.n_unknowns(),
            unknowns.len()
        )));
    }
    d.cost(unknowns)
}

/// Rebuilds a trajectory (velocities, `𝔱`, `g`, cost, residual) from base
/// points on the merged grid, e.g. after reading it back from disk.
pub fn trajectory_from_points(
    problem: &InterpolationProblem,
    config: &SolverConfig,
    points: &[BasePoint],
) -> Result<Trajectory> {
    let d = Discretization::new(problem, config)?;
    let u = d.unknowns_from_points(points)?;
    let r = d.residual(&u)?;
    let norm = r.amax();
    d.build_trajectory(&u, 0, norm <= config.newton_tol, vec![norm], norm)
}
