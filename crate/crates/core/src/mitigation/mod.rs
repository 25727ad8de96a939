//! Statistical post-processing: Bayesian resampling of counts, readout
//! correction, zero-noise extrapolation and ensemble summaries.

pub mod bayes;
pub mod readout;
pub mod stats;
pub mod zne;

pub use bayes::{
    beta_update, dirichlet_update, sample_predictive, BetaPosterior, DirichletPosterior,
    PredictivePosterior,
};
pub use readout::{
    mitigate_readout_ensemble, mitigate_with_params, readout_correction_map, sample_readout_params,
    CorrectionMap, ReadoutParams,
};
pub use stats::{ensemble_statistics, EnsembleEstimate};
pub use zne::{exp_extrapolate, richardson_extrapolate, shifted_exp_extrapolate, Extrapolation};
