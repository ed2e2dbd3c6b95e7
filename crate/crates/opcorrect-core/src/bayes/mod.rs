//! Bayesian inversion: observations, likelihood potentials, pCN sampling,
//! posterior means, and posterior-error bounds.

mod bound;
mod observation;
mod pcn;
mod posterior;
mod potential;

pub use bound::{
    estimate_bound_and_kl, estimate_bound_constants, estimate_kl_importance, BoundConstants,
    KlEstimate, BOCHNER_P,
};
pub use observation::{build_observation, make_synthetic_data, ObservationSetup};
pub use pcn::{pcn_sample, ChainRecord, MAX_FAILED_EVALS};
pub use posterior::{post_burn_in_count, posterior_mean, Transform};
pub use potential::{
    potential, CorrectedMap, EvalCounters, GaussianPotential, ModelMap, Potential, StateMap,
    SurrogateMap, ZeroPotential,
};
