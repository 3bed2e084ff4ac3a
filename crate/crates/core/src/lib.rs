pub mod algebra;
pub mod connection;
pub mod error;
pub mod geometry;
pub mod interpolator;
pub mod swimmer;
pub mod validation;

pub use error::{Error, Result};
