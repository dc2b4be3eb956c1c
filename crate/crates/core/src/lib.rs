//! Sparse active subspace + hybrid polynomial correlated function expansion
//! (SAS-HPCFE) for high-dimensional structural reliability analysis.
//!
//! The pipeline fits a least-angle-regression sparse PCE on a Sobol design,
//! uses its analytic gradients to find an active subspace, re-trains a
//! PCFE + Gaussian-process hybrid on the projected design and runs Monte
//! Carlo on that surrogate. Only the design points call the true model.

pub mod activesub;
pub mod benchmarks;
pub mod error;
pub mod hpcfe;
mod par;
pub mod polybasis;
pub mod probspace;
pub mod reliability;
pub mod spce;

pub use error::{Error, Result};
