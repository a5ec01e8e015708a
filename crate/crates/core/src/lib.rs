//! Bayesian estimation of adsorption-isotherm and mixture-model parameters.
//!
//! The crate provides the forward models (a two-component chromatography
//! column with a bi-Langmuir isotherm, and Gaussian/Gamma mixture
//! surrogates), the joint posterior of parameters and noise variance, a
//! gradient-descent restoration of the unbounded parameter block, three MCMC
//! kernels and chain diagnostics.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chroma;
pub mod diagnostics;
pub mod error;
pub mod mixtures;
pub mod model;
pub mod optim;
pub mod posterior;
pub mod samplers;
pub mod types;

pub use error::{Error, Result};
pub use model::ForwardModel;
pub use posterior::PosteriorContext;
pub use types::{
    ChainRecord, Hyperparameters, Observation, ParameterVector, ReducedParameters, ReparamKind, ReparamMap, SortRule,
};
