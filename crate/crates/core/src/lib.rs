//! Unitary Virasoro modules at finite level cutoff, vector fields on the
//! circle, framed annuli, time-ordered exponentials, and the representation
//! of the annulus semigroup built from them.

pub mod annulus;
pub mod error;
pub mod evolve;
pub mod field;
pub mod linalg;
pub mod rep;
pub mod sample;
pub mod virmod;

pub use error::{Error, Result};
