//! Preconditioned Crank--Nicolson sampling.

use crate::bayes::potential::{EvalCounters, Potential};
use crate::error::{Error, Result};
use crate::fem::NodalField;
use crate::prior::BiLaplacianPrior;
use crate::rng::RngStream;

/// Failed potential evaluations tolerated per chain before aborting.
pub const MAX_FAILED_EVALS: u32 = 10;

/// One chain: thinned samples, per-step potentials and accept flags, and the
/// accumulated solve counters.
#[derive(Debug, Clone)]
pub struct ChainRecord {
    pub samples: Vec<NodalField>,
    /// Potential of the current state after each step.
    pub potentials: Vec<f64>,
    pub accept_flags: Vec<bool>,
    pub beta_pcn: f64,
    pub thin: usize,
    pub seed: u64,
    pub stream: u64,
    pub counters: EvalCounters,
    pub failed_evals: u32,
}

impl ChainRecord {
    pub fn n_steps(&self) -> usize {
        self.accept_flags.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accept_flags.is_empty() {
            return 0.0;
        }
        self.accept_flags.iter().filter(|&&a| a).count() as f64 / self.accept_flags.len() as f64
    }
}

/// Run one pCN chain. The proposal contracts toward the prior mean,
///
/// ```text
/// m_p = m_pr + sqrt(1 - beta^2) (m_k - m_pr) + beta (m_hat - m_pr),
/// ```
///
/// with `m_hat` a fresh prior draw, and the move is accepted when
/// `exp(phi_k - phi_p) >= r`, `r ~ U[0,1)`. A failed potential evaluation at
/// a proposal counts as a rejection (up to [`MAX_FAILED_EVALS`], then the
/// chain aborts). Every `thin`-th state is stored.
pub fn pcn_sample(
    pot: &dyn Potential,
    prior: &BiLaplacianPrior,
    beta: f64,
    n_steps: usize,
    thin: usize,
    mut rng: RngStream,
    init: NodalField,
) -> Result<ChainRecord> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::invalid("beta must lie in (0, 1)"));
    }
    if thin == 0 || n_steps == 0 {
        return Err(Error::invalid("n_steps and thin must be positive"));
    }
    let contraction = (1.0 - beta * beta).sqrt();
    let m_pr = prior.mean();

    let mut counters = EvalCounters::default();
    let mut current = init;
    let mut phi_current = pot.phi(&current, &mut counters)?;
    let mut record = ChainRecord {
        samples: Vec::with_capacity(n_steps / thin),
        potentials: Vec::with_capacity(n_steps),
        accept_flags: Vec::with_capacity(n_steps),
        beta_pcn: beta,
        thin,
        seed: rng.seed(),
        stream: rng.stream(),
        counters: EvalCounters::default(),
        failed_evals: 0,
    };

    for step in 0..n_steps {
        let draw = prior.sample(&mut rng)?;
        let proposal_values: Vec<f64> = current
            .values()
            .iter()
            .zip(draw.values())
            .zip(m_pr.values())
            .map(|((&mk, &mh), &mp)| mp + contraction * (mk - mp) + beta * (mh - mp))
            .collect();
        let proposal = NodalField::new(proposal_values, current.role())?;

        match pot.phi(&proposal, &mut counters) {
            Ok(phi_proposal) => {
                let r = rng.uniform();
                if (phi_current - phi_proposal).exp() >= r {
                    current = proposal;
                    phi_current = phi_proposal;
                    record.accept_flags.push(true);
                } else {
                    record.accept_flags.push(false);
                }
            }
            Err(_) => {
                record.failed_evals += 1;
                if record.failed_evals > MAX_FAILED_EVALS {
                    return Err(Error::ChainAborted {
                        failures: record.failed_evals as usize,
                        step,
                    });
                }
                record.accept_flags.push(false);
            }
        }
        record.potentials.push(phi_current);
        if (step + 1) % thin == 0 {
            record.samples.push(current.clone());
        }
    }
    record.counters = counters;
    Ok(record)
}
