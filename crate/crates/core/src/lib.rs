pub mod cli;
pub mod error;
pub mod jets;
pub mod linalg;
pub mod models;
pub mod potential;
pub mod quadrature;
pub mod vertex;

pub use error::{Error, Result};
pub use jets::{Jet, Scalar, C64};
