//! Generic posterior sampling over mixed-support parameter vectors.

pub mod diagnostics;
pub mod hdi;
pub mod mcmc;
pub mod predictive;
pub mod space;

pub use hdi::{hdi, MIN_HDI_DRAWS};
pub use mcmc::{fit, Diagnostics, FitConfig, PosteriorEnsemble, ScalarDiagnostic};
pub use predictive::posterior_predictive;
pub use space::{GroupId, ParamGroup, ParamSpace, Params, Support};
