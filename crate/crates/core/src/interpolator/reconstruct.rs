//! Reconstruction `ġ = g 𝔱̂` by a fourth-order commutator-free Lie-group method.

use crate::algebra::{exp_group, AlgebraVector, GroupElement};
use crate::error::{invalid, Result};

/// Integrates `ġ = g 𝔱̂` from `g0` over `K` steps of size `dt`.
///
/// `samples` holds `𝔱` at the `2K + 1` half-step times `t₀ + i·dt/2`, so
/// each step reads its start, midpoint and end values. Returns the `K + 1`
/// group values at the step boundaries, starting with `g0` itself. The
/// factors are re-projected onto the group every `reproject_every` steps
/// (0 disables re-projection).
pub fn reconstruct_group(
    g0: &GroupElement,
    samples: &[AlgebraVector],
    dt: f64,
    reproject_every: usize,
) -> Result<Vec<GroupElement>> {
    if samples.len().is_multiple_of(2) {
        return Err(invalid(format!(
            "reconstruct_group needs an odd number of half-step samples, got {}",
            samples.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("reconstruct_group: step must be positive and finite"));
    }
    let algebra = g0.algebra();
    if let Some(bad) = samples.iter().position(|s| s.algebra() != algebra) {
        return Err(invalid(format!(
            "reconstruct_group: sample {bad} is in {}, the initial element in {algebra}",
            samples[bad].algebra()
        )));
    }
    let steps = samples.len() / 2;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(g0.clone());
    let mut g = g0.clone();
    for i in 0..steps {
        let (x1, x2, x4) = (&samples[2 * i], &samples[2 * i + 1], &samples[2 * i + 2]);
        // Stages 2 and 3 coincide because 𝔱 does not depend on g.
        let mid = x2 * (1.0 / 3.0);
        let b1 = x1 * 0.25 + &mid - x4 * (1.0 / 12.0);
        let b2 = x4 * 0.25 + &mid - x1 * (1.0 / 12.0);
        g = &(&g * &exp_group(&(b1 * dt))) * &exp_group(&(b2 * dt));
        if reproject_every > 0 && (i + 1) % reproject_every == 0 {
            g = g.reproject();
        }
        out.push(g.clone());
    }
    Ok(out)
}
