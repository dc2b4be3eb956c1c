//! Marginal distributions, isoprobabilistic transforms and samplers.

mod marginal;
mod mc;
mod model;
mod sample;
mod sobol;

pub use marginal::{moment_match, Marginal, MarginalKind, Params, EULER_GAMMA};
pub(crate) use marginal::{std_normal_cdf, std_normal_ppf};
pub use mc::{mc_sample, uniform_samples};
pub use model::{ProbabilisticModel, VariableSpec};
pub use sample::{transform, SampleMatrix, Space};
pub use sobol::{sobol_points, sobol_points_from, Sobol, MAX_DIM as SOBOL_MAX_DIM};
