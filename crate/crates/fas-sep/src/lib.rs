//! Symbol error probability of a fluid antenna receiver that combines the
//! best K of N correlated Rayleigh ports with maximal-ratio combining.

pub mod cf_engine;
pub mod cli;
pub mod compositions;
pub mod correlation;
pub(crate) mod dd;
pub mod error;
pub(crate) mod fixed;
pub mod mc_sim;
pub mod modem;
pub mod quad;
pub mod sep_analytic;
pub mod specfun;
pub mod validation;

pub use error::{FasError, Result};
