//! Truncated Taylor arithmetic for matrix-valued curves.
//!
//! Used to push derivative jets of exponential coordinates through the group
//! exponential exactly, e.g. to get `ω, ω̇, ω̈, ω⃛` of `t ↦ exp(φ(t))` from
//! `φ, …, φ⁗` without finite differences.

use nalgebra::{SMatrix, Vector3};

use super::hat3;

/// Highest power of τ kept.
pub const DEGREE: usize = 4;

/// `Σ_k c[k] τ^k`, truncated after [`DEGREE`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatPoly<const D: usize> {
    pub c: [SMatrix<f64, D, D>; DEGREE + 1],
}

impl<const D: usize> MatPoly<D> {
    pub fn zero() -> Self {
        Self {
            c: [SMatrix::zeros(); DEGREE + 1],
        }
    }

    pub fn identity() -> Self {
        let mut p = Self::zero();
        p.c[0] = SMatrix::identity();
        p
    }

    /// Builds the polynomial from derivatives `f(0), f'(0), …` (not Taylor coefficients).
    pub fn from_derivatives(d: &[SMatrix<f64, D, D>]) -> Self {
        let mut p = Self::zero();
        let mut fact = 1.0;
        for (k, m) in d.iter().enumerate().take(DEGREE + 1) {
            if k > 0 {
                fact *= k as f64;
            }
            p.c[k] = m / fact;
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for i in 0..=DEGREE {
            for j in 0..=(DEGREE - i) {
                out.c[i + j] += self.c[i] * other.c[j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for m in &mut out.c {
            *m *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.c.iter_mut().zip(&other.c) {
            *a += b;
        }
        out
    }

    pub fn derivative(&self) -> Self {
        let mut out = Self::zero();
        for k in 0..DEGREE {
            out.c[k] = self.c[k + 1] * (k + 1) as f64;
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.c.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    /// `f^(k)(0)` for each k.
    pub fn derivatives(&self) -> [SMatrix<f64, D, D>; DEGREE + 1] {
        let mut out = self.c;
        let mut fact = 1.0;
        for (k, m) in out.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *m *= fact;
        }
        out
    }
}

/// Matrix exponential of a polynomial curve, by scaling and squaring.
pub fn exp_poly<const D: usize>(x: &MatPoly<D>) -> MatPoly<D> {
    let norm = x.c[0].norm().max(x.max_abs());
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let y = x.scale(scale);
    let mut sum = MatPoly::identity();
    let mut term = MatPoly::identity();
    for n in 1..60 {
        term = term.mul(&y).scale(1.0 / n as f64);
        sum = sum.add(&term);
        if term.max_abs() <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.mul(&sum);
    }
    sum
}

/// Derivatives `(W, Ẇ, Ẅ, W⃛)` at τ = 0 of the body velocity `W = E⁻¹ dE/dτ`
/// of `E(τ) = exp(X(τ))`, where `x_derivs` holds `X, Ẋ, …, X⁗` at τ = 0.
pub fn body_velocity_jet<const D: usize>(
    x_derivs: &[SMatrix<f64, D, D>; DEGREE + 1],
) -> [SMatrix<f64, D, D>; DEGREE] {
    let x = MatPoly::from_derivatives(x_derivs);
    let e = exp_poly(&x);
    let e_inv = exp_poly(&x.scale(-1.0));
    let w = e_inv.mul(&e.derivative()).derivatives();
    [w[0], w[1], w[2], w[3]]
}

/// `ω, ω̇, ω̈, ω⃛` of `t ↦ exp(φ(t))` from `φ, φ̇, φ̈, φ⃛, φ⁗`.
pub fn so3_body_velocity_jet(phi: &[Vector3<f64>; DEGREE + 1]) -> [Vector3<f64>; DEGREE] {
    let x = phi.map(|v| hat3(&v));
    let w = body_velocity_jet(&x);
    w.map(|m| super::vee3(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{exp_so3, right_jacobian_so3};
    use nalgebra::Matrix3;

    #[test]
    fn exp_of_constant_matches_rodrigues() {
        let w = Vector3::new(0.7, -1.9, 2.4);
        let mut p = MatPoly::<3>::zero();
        p.c[0] = hat3(&w);
        let e = exp_poly(&p);
        assert!((e.c[0] - exp_so3(&w)).amax() < 1e-13);
        for k in 1..=DEGREE {
            assert_eq!(e.c[k], Matrix3::zeros());
        }
    }

    #[test]
    fn first_order_jet_is_the_right_jacobian() {
        let phi = Vector3::new(0.5, 1.2, -0.8);
        let v = Vector3::new(-0.3, 0.9, 0.4);
        let jet = so3_body_velocity_jet(&[phi, v, Vector3::zeros(), Vector3::zeros(), Vector3::zeros()]);
        assert!((jet[0] - right_jacobian_so3(&phi) * v).amax() < 1e-13);
    }

    #[test]
    fn jet_matches_finite_differences_of_body_velocity() {
        // φ(t) = a + b t + c t² + d t³ + e t⁴
        let a = Vector3::new(0.2, -0.4, 0.9);
        let b = Vector3::new(0.5, 0.3, -0.2);
        let c = Vector3::new(-0.4, 0.8, 0.1);
        let d = Vector3::new(0.3, -0.1, 0.6);
        let e = Vector3::new(0.2, 0.2, -0.5);
        let phi = |t: f64| a + b * t + c * t * t + d * t.powi(3) + e * t.powi(4);
        let dphi = |t: f64| b + c * (2.0 * t) + d * (3.0 * t * t) + e * (4.0 * t.powi(3));
        let omega = |t: f64| right_jacobian_so3(&phi(t)) * dphi(t);
        let jet = so3_body_velocity_jet(&[a, b, c * 2.0, d * 6.0, e * 24.0]);
        let h = 1e-2;
        let f: Vec<Vector3<f64>> = (-3..=3).map(|k| omega(k as f64 * h)).collect();
        let d1 = (f[1] - f[2] * 8.0 + f[4] * 8.0 - f[5]) / (12.0 * h);
        let d2 = (-f[1] + f[2] * 16.0 - f[3] * 30.0 + f[4] * 16.0 - f[5]) / (12.0 * h * h);
        let d3 = (f[0] - f[1] * 8.0 + f[2] * 13.0 - f[4] * 13.0 + f[5] * 8.0 - f[6]) / (8.0 * h.powi(3));
        assert!((jet[0] - omega(0.0)).amax() < 1e-13);
        assert!((jet[1] - d1).amax() < 1e-6);
        assert!((jet[2] - d2).amax() < 1e-5);
        assert!((jet[3] - d3).amax() < 1e-4, "{}", (jet[3] - d3).amax());
    }
}
