use nalgebra::DVector;

use crate::error::{invalid, Result};

/// C² piecewise cubic with clamped end slopes. Segment `i` is
/// `c[i][0] + c[i][1] s + c[i][2] s² + c[i][3] s³` with `s = t − Tᵢ`.
#[derive(Clone, Debug)]
pub struct ClampedSpline {
    times: Vec<f64>,
    coeffs: Vec<[DVector<f64>; 4]>,
}

/// Classical clamped cubic spline through `(Tᵢ, xᵢ)` with `ẋ(T₀) = v0`,
/// `ẋ(T_N) = vN`, from the tridiagonal system on the knot slopes.
pub fn clamped_spline_oracle(
    times: &[f64],
    values: &[DVector<f64>],
    v0: &DVector<f64>,
    vn: &DVector<f64>,
) -> Result<ClampedSpline> {
    let n = times.len();
    if n < 2 || values.len() != n {
        return Err(invalid("spline needs at least 2 waypoints with one value each"));
    }
    if let Some(i) = (1..n).find(|&i| times[i] <= times[i - 1]) {
        return Err(invalid(format!("spline knot {i} does not increase")));
    }
    let dim = values[0].len();
    if values.iter().any(|v| v.len() != dim) || v0.len() != dim || vn.len() != dim {
        return Err(invalid("spline data have inconsistent dimensions"));
    }
    let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut slopes = vec![DVector::zeros(dim); n];
    slopes[0] = v0.clone();
    slopes[n - 1] = vn.clone();
    if n > 2 {
        // Thomas algorithm on the interior slopes.
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut lower = vec![0.0; m];
        let mut rhs = vec![DVector::zeros(dim); m];
        for r in 0..m {
            let i = r + 1;
            lower[r] = 1.0 / h[i - 1];
            diag[r] = 2.0 * (1.0 / h[i - 1] + 1.0 / h[i]);
            upper[r] = 1.0 / h[i];
            rhs[r] = (&values[i] - &values[i - 1]) * (3.0 / (h[i - 1] * h[i - 1]))
                + (&values[i + 1] - &values[i]) * (3.0 / (h[i] * h[i]));
        }
        rhs[0] -= v0 * lower[0];
        rhs[m - 1] -= vn * upper[m - 1];
        for r in 1..m {
            let f = lower[r] / diag[r - 1];
            diag[r] -= f * upper[r - 1];
            let prev = rhs[r - 1].clone();
            rhs[r] -= prev * f;
        }
        slopes[m] = &rhs[m - 1] / diag[m - 1];
        for r in (0..m - 1).rev() {
            slopes[r + 1] = (&rhs[r] - &slopes[r + 2] * upper[r]) / diag[r];
        }
    }
    let coeffs = (0..n - 1)
        .map(|i| {
            let delta = (&values[i + 1] - &values[i]) / h[i];
            let c2 = (&delta * 3.0 - &slopes[i] * 2.0 - &slopes[i + 1]) / h[i];
            let c3 = (&slopes[i] + &slopes[i + 1] - &delta * 2.0) / (h[i] * h[i]);
            [values[i].clone(), slopes[i].clone(), c2, c3]
        })
        .collect();
    Ok(ClampedSpline {
        times: times.to_vec(),
        coeffs,
    })
}

impl ClampedSpline {
    pub fn coefficients(&self) -> &[[DVector<f64>; 4]] {
        &self.coeffs
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.coeffs.len() - 1;
        self.times[1..=last].iter().take_while(|&&tk| t >= tk).count()
    }

    /// `order`-th derivative (0..=3) at `t`; segment `i` owns `[Tᵢ, Tᵢ₊₁)`.
    pub fn eval(&self, t: f64, order: usize) -> DVector<f64> {
        self.eval_in(self.segment(t), t, order)
    }

    /// Same as [`eval`](Self::eval) but on a chosen segment (one-sided limits at knots).
    pub fn eval_in(&self, segment: usize, t: f64, order: usize) -> DVector<f64> {
        let c = &self.coeffs[segment];
        let s = t - self.times[segment];
        match order {
            0 => &c[0] + &c[1] * s + &c[2] * (s * s) + &c[3] * (s * s * s),
            1 => &c[1] + &c[2] * (2.0 * s) + &c[3] * (3.0 * s * s),
            2 => &c[2] * 2.0 + &c[3] * (6.0 * s),
            3 => &c[3] * 6.0,
            _ => DVector::zeros(c[0].len()),
        }
    }
}
