pub mod data;
pub mod distill;
pub mod error;
pub mod linalg;
pub mod math;
pub mod oracle;
pub mod rff;
pub mod rng;
pub mod sweep;
pub mod transform;
pub mod verify;

pub use error::{Error, NumericalFailure, Result};
