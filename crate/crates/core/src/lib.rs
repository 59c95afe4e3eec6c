//! Localized kernel ODE estimation of time-varying regulatory effects, with
//! de-biased simultaneous confidence bands and FDR-controlled network recovery.

pub mod bench;
pub mod error;
pub mod inference;
pub mod kernels;
pub mod localized_estimator;
pub mod ode_systems;
pub mod seeds;
pub mod smoothing;

pub use error::{Error, Result};
