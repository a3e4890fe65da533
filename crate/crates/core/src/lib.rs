//! Exact design-based evaluation of composite estimators for rotating-panel
//! labor-force surveys.
//!
//! A synthetic population of individuals with monthly employment statuses is
//! sampled by a 4-8-4 rotation design whose sample space is small enough
//! (1000 draws by default) to enumerate. Every estimator can therefore be run
//! on every possible sample, giving its exact bias, variance and MSE.
//!
//! Modules, bottom up:
//!
//! * [`arrays`]: labeled arrays with first-axis-fastest flattening,
//!   array multiplication and pseudo-inverses.
//! * [`population`]: synthetic populations, totals and the rate function.
//! * [`design`]: clusters, rotation groups and the rotation chart.
//! * [`estimators`]: direct, month-in-sample, AK, BLUE and regression composite.
//! * [`evaluation`]: enumeration, covariance matrices, linearized variances.
//! * [`optimize`]: Nelder-Mead and grid searches for the best coefficients.
//! * [`experiment`]: the configurable end-to-end runner behind the binary.

pub mod arrays;
pub mod design;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod experiment;
pub mod optimize;
pub mod population;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
