//! Solve counting and speedup accounting.
//!
//! The cost unit is one iteratively solved linear system at the forward
//! model's sparsity (a Newton step, an error-correction solve). Surrogate
//! evaluations are mapped into this unit by wall-clock calibration against
//! one such solve.

use std::time::Instant;

use crate::bayes::{ChainRecord, EvalCounters};
use crate::error::{Error, Result};
use crate::fem::{NodalField, SparseMatrix};
use crate::reaction_diffusion::ReactionDiffusion;
use crate::surrogate::{ReducedBasis, ResNetSurrogate};

/// Offline plus online solve counts for one sampling campaign.
#[derive(Debug, Clone, Default)]
pub struct CostLedger {
    /// Newton iterations spent generating training snapshots.
    pub offline_training_newton_iters: u64,
    /// Linearized solves spent building the derivative-informed basis.
    pub offline_basis_solves: u64,
    /// Wall time of network training (reported separately; excluded from
    /// the unit-based offline cost).
    pub offline_training_wall_secs: f64,
    pub online: EvalCounters,
    pub online_wall_secs: f64,
    /// Total Markov chain steps covered by `online`.
    pub n_chain: u64,
}

impl CostLedger {
    /// Online counters merged from finished chains.
    pub fn from_chains(chains: &[ChainRecord]) -> Self {
        let mut ledger = CostLedger::default();
        for c in chains {
            ledger.online.merge(&c.counters);
            ledger.n_chain += c.n_steps() as u64;
        }
        ledger
    }

    /// Offline cost in linearized-solve units.
    pub fn offline_units(&self) -> f64 {
        (self.offline_training_newton_iters + self.offline_basis_solves) as f64
    }

    /// Online cost in linearized-solve units.
    pub fn online_units(&self, calib: &CostCalibration) -> f64 {
        self.online.newton_iters as f64
            + self.online.correction_solves as f64
            + self.online.surrogate_evals as f64 * calib.units_per_surrogate_eval()
    }
}

/// Wall-clock equivalence between one linearized solve and one surrogate
/// evaluation, measured on the spot.
#[derive(Debug, Clone, Copy)]
pub struct CostCalibration {
    pub solve_secs: f64,
    pub surrogate_eval_secs: f64,
}

impl CostCalibration {
    pub fn units_per_surrogate_eval(&self) -> f64 {
        if self.solve_secs > 0.0 {
            self.surrogate_eval_secs / self.solve_secs
        } else {
            0.0
        }
    }
}

/// Time one error-correction solve against one surrogate evaluation,
/// averaged over `reps` repetitions at the given parameter field.
pub fn calibrate(
    model: &ReactionDiffusion,
    basis: &ReducedBasis,
    net: &ResNetSurrogate,
    mass: &SparseMatrix,
    m: &NodalField,
    reps: usize,
) -> Result<CostCalibration> {
    if reps == 0 {
        return Err(Error::invalid("need at least one calibration repetition"));
    }
    let prediction = basis.predict(net, mass, m)?;

    let t0 = Instant::now();
    for _ in 0..reps {
        let (u, _) = model.error_correct(&prediction, m)?;
        std::hint::black_box(&u);
    }
    let solve_secs = t0.elapsed().as_secs_f64() / reps as f64;

    let t1 = Instant::now();
    for _ in 0..reps {
        let u = basis.predict(net, mass, m)?;
        std::hint::black_box(&u);
    }
    let surrogate_eval_secs = t1.elapsed().as_secs_f64() / reps as f64;

    Ok(CostCalibration {
        solve_secs,
        surrogate_eval_secs,
    })
}

/// Observed speedup: total model sampling cost over total surrogate sampling
/// cost including the surrogate's offline cost, in solve units.
pub fn observed_speedup(
    model_ledger: &CostLedger,
    surrogate_ledger: &CostLedger,
    calib: &CostCalibration,
) -> f64 {
    let numerator = model_ledger.online_units(calib);
    let denominator = surrogate_ledger.online_units(calib) + surrogate_ledger.offline_units();
    numerator / denominator
}

/// Observed speedup in wall time (same definition, measured clocks).
pub fn observed_wall_speedup(model_ledger: &CostLedger, surrogate_ledger: &CostLedger) -> f64 {
    model_ledger.online_wall_secs
        / (surrogate_ledger.online_wall_secs + surrogate_ledger.offline_training_wall_secs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedupMode {
    /// Raw neural operator.
    No,
    /// Error-corrected neural operator.
    Ecno,
}

/// Asymptotic (offline-free) speedup per potential evaluation.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticSpeedup {
    /// Cost-unit ratio; `None` when the surrogate cost in units vanished
    /// (reported as unbounded, wall ratio still meaningful).
    pub units: Option<f64>,
    /// Wall-clock ratio from the calibration.
    pub wall: f64,
    /// Average Newton iterations per model evaluation (floored at one),
    /// the per-evaluation model cost in units.
    pub model_cost_units: f64,
}

/// Ratio of the per-evaluation model cost to the per-evaluation surrogate
/// cost. The model cost is the chain-averaged Newton iteration count.
pub fn asymptotic_speedup(
    model_ledger: &CostLedger,
    calib: &CostCalibration,
    mode: SpeedupMode,
) -> Result<AsymptoticSpeedup> {
    if model_ledger.online.forward_solves == 0 {
        return Err(Error::invalid("model ledger has no forward solves"));
    }
    let mean_newton = model_ledger.online.newton_iters as f64
        / model_ledger.online.forward_solves as f64;
    let model_cost_units = mean_newton.max(1.0);
    let no_units = calib.units_per_surrogate_eval();
    let (surrogate_units, surrogate_secs) = match mode {
        SpeedupMode::No => (no_units, calib.surrogate_eval_secs),
        SpeedupMode::Ecno => (no_units + 1.0, calib.surrogate_eval_secs + calib.solve_secs),
    };
    let units = if surrogate_units > 0.0 {
        Some(model_cost_units / surrogate_units)
    } else {
        None
    };
    let wall = model_cost_units * calib.solve_secs / surrogate_secs;
    Ok(AsymptoticSpeedup {
        units,
        wall,
        model_cost_units,
    })
}
