//! Bagged cross-validation bandwidth selection for Gaussian kernel density
//! estimation.

pub mod amse;
pub mod bagging;
pub mod binned;
pub mod cli;
pub mod cv;
pub mod density;
pub mod em;
pub mod error;
pub mod experiments;
pub mod kde;
pub mod kernel;
pub mod mixture;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
pub use sample::Sample;
