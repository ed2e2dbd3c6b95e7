//! Likelihood potential and the state maps that feed it.

use crate::bayes::observation::ObservationSetup;
use crate::error::Result;
use crate::fem::{NodalField, SparseMatrix};
use crate::reaction_diffusion::ReactionDiffusion;
use crate::surrogate::{ReducedBasis, ResNetSurrogate};

/// Solve-cost counters accumulated across potential evaluations. Merging is
/// plain addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    pub forward_solves: u64,
    pub newton_iters: u64,
    /// Newton-step CG solves of the full model.
    pub linear_solves: u64,
    pub surrogate_evals: u64,
    pub correction_solves: u64,
}

impl EvalCounters {
    pub fn merge(&mut self, other: &EvalCounters) {
        self.forward_solves += other.forward_solves;
        self.newton_iters += other.newton_iters;
        self.linear_solves += other.linear_solves;
        self.surrogate_evals += other.surrogate_evals;
        self.correction_solves += other.correction_solves;
    }
}

/// A parameter-to-state map with cost accounting.
pub trait StateMap: Sync {
    fn state(&self, m: &NodalField, counters: &mut EvalCounters) -> Result<NodalField>;
    fn name(&self) -> &'static str;
}

/// Full Newton solve of the forward model.
pub struct ModelMap<'a> {
    pub model: &'a ReactionDiffusion,
    pub tol: f64,
    pub max_newton: usize,
}

impl StateMap for ModelMap<'_> {
    fn state(&self, m: &NodalField, counters: &mut EvalCounters) -> Result<NodalField> {
        let sol = self.model.solve_forward(m, self.tol, self.max_newton)?;
        counters.forward_solves += 1;
        counters.newton_iters += sol.newton_iters as u64;
        counters.linear_solves += sol.linear_solve_count as u64;
        Ok(sol.u)
    }

    fn name(&self) -> &'static str {
        "model"
    }
}

/// Raw neural operator prediction.
pub struct SurrogateMap<'a> {
    pub basis: &'a ReducedBasis,
    pub net: &'a ResNetSurrogate,
    pub mass: &'a SparseMatrix,
}

impl StateMap for SurrogateMap<'_> {
    fn state(&self, m: &NodalField, counters: &mut EvalCounters) -> Result<NodalField> {
        counters.surrogate_evals += 1;
        self.basis.predict(self.net, self.mass, m)
    }

    fn name(&self) -> &'static str {
        "no"
    }
}

/// Neural operator prediction followed by the one-step residual correction.
pub struct CorrectedMap<'a> {
    pub basis: &'a ReducedBasis,
    pub net: &'a ResNetSurrogate,
    pub mass: &'a SparseMatrix,
    pub model: &'a ReactionDiffusion,
}

impl StateMap for CorrectedMap<'_> {
    fn state(&self, m: &NodalField, counters: &mut EvalCounters) -> Result<NodalField> {
        counters.surrogate_evals += 1;
        let prediction = self.basis.predict(self.net, self.mass, m)?;
        let (corrected, solves) = self.model.error_correct(&prediction, m)?;
        counters.correction_solves += solves as u64;
        Ok(corrected)
    }

    fn name(&self) -> &'static str {
        "ecno"
    }
}

/// Gaussian misfit potential `phi(m) = |y* - B u(m)|^2 / (2 sigma^2)`.
pub fn potential(
    m: &NodalField,
    y_star: &[f64],
    obs: &ObservationSetup,
    map: &dyn StateMap,
    counters: &mut EvalCounters,
) -> Result<f64> {
    let sigma = obs.noise_sigma()?;
    let u = map.state(m, counters)?;
    let predicted = obs.observe(&u);
    let misfit: f64 = y_star
        .iter()
        .zip(&predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(0.5 * misfit / (sigma * sigma))
}

/// Potential evaluator handed to the sampler.
pub trait Potential: Sync {
    fn phi(&self, m: &NodalField, counters: &mut EvalCounters) -> Result<f64>;
}

/// The Gaussian potential bound to one data set and one state map.
pub struct GaussianPotential<'a> {
    pub y_star: &'a [f64],
    pub obs: &'a ObservationSetup,
    pub map: &'a dyn StateMap,
}

impl Potential for GaussianPotential<'_> {
    fn phi(&self, m: &NodalField, counters: &mut EvalCounters) -> Result<f64> {
        potential(m, self.y_star, self.obs, self.map, counters)
    }
}

/// `phi = 0` everywhere; the sampler then reproduces the prior.
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn phi(&self, _m: &NodalField, _counters: &mut EvalCounters) -> Result<f64> {
        Ok(0.0)
    }
}
