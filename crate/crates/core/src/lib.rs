//! Estimation of direct effects in multivariate-response regression with
//! unobserved confounders that interact with the observed covariates.
//!
//! The hidden-variable signal is removed by projecting the responses onto
//! the orthogonal complement of an estimated singular space, recovered from
//! a regression of residual outer products on the covariates.

pub mod bench;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod model;
pub mod regress;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    validate, CovarianceFit, Dataset, DebiasedEstimate, FirstStageFit, GroundTruth, Method,
    NoiseSpec, ProjectionBasis, SimulationConfig,
};
