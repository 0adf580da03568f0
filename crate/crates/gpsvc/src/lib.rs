//! Gaussian-process-based varying-coefficient regression.
//!
//! The model couples each covariate with a coefficient surface
//! `beta_k(s) = mu_k + eta_k(s)`, where `eta_k` is a zero-mean Gaussian
//! process over the observation locations. The crate covers the full
//! workflow: synthetic data generation, (profile) maximum likelihood
//! estimation with optional covariance tapering, EBLUP prediction of the
//! latent surfaces, and joint fixed/random-effect selection by adaptive-
//! lasso penalized likelihood with grid or surrogate-model shrinkage search.

pub mod error;
pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod mle;
pub mod optimize;
pub mod predict;
pub mod sample;
pub mod select;
pub mod sparse;

pub(crate) const SQRT_3: f64 = 1.7320508075688772;
pub(crate) const SQRT_5: f64 = 2.23606797749979;

pub use error::{Error, Result, Violation};
pub use kernel::{correlation, covariance, tapered_covariance, KernelKind, KernelParams, TaperSpec};
pub use likelihood::{CovYFactor, CovYMatrix, KernelSpec, LikelihoodEngine};
pub use model::{
    median_distance, pairwise_distances, CovParams, DistanceMatrix, GpParams, ParamVector, SvcData,
};
pub use mle::{
    default_bounds_and_init, fit_mle, fit_mle_on, standard_errors, summary_stats, wald_test,
    z_test, BoundsInit, FitResult, MleControl, StdErrors, TestStats, WaldTest, ZTest,
};
pub use optimize::{minimize_bounded, FdScheme, OptimOptions, OptimOutcome};
pub use predict::{fitted_random_effects, predict_svc, PredictionResult};
pub use sample::{sample_full_svc, sample_gp, sample_uniform_locs, SvcTruth};
pub use select::{
    adaptive_weights, cd_pmle, effective_df, expected_improvement, information_criterion,
    lhs_design, mu_lasso_step, penalized_neg2_log_lik, select_grid, select_grid_with, select_mbo,
    select_mbo_with, theta_penalized_step, AdaptiveWeights, CdControl, CdOutcome, IcType,
    LambdaBox, SelectionEval, SelectionMethod, SelectionResult, ShrinkagePair, SurrogateState,
};
