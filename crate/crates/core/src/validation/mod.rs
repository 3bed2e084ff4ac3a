//! Independent oracles and audits for solved trajectories and the geometry.

mod identities;
mod spline;
mod variation;

pub use identities::{
    identity_suite, identity_suite_with, CustomConnection, IdentityCheck, IdentityReport,
    ALGEBRAIC_TOL, ORACLE_TOL,
};
pub use spline::{clamped_spline_oracle, ClampedSpline};
pub use variation::{
    first_variation_check, variation_derivative, VariationEstimate, VariationField, VariationReport,
};
