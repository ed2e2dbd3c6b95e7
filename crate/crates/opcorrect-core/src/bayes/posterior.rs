//! Posterior predictive means from merged chains.

use crate::bayes::pcn::ChainRecord;
use crate::error::{Error, Result};
use crate::fem::NodalField;

/// Pointwise transform applied to parameter samples before averaging (the
/// coefficient field of the forward model is `exp(m)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Exp,
    ExpPlusOne,
    Identity,
}

impl Transform {
    fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Exp => v.exp(),
            Transform::ExpPlusOne => v.exp() + 1.0,
            Transform::Identity => v,
        }
    }
}

/// Average `transform(m)` over the post-burn-in thinned samples of all
/// chains. The burn-in fraction is applied per chain to its kept samples.
pub fn posterior_mean(
    chains: &[ChainRecord],
    burn_in_frac: f64,
    transform: Transform,
) -> Result<NodalField> {
    if !(0.0..1.0).contains(&burn_in_frac) {
        return Err(Error::invalid("burn-in fraction must be in [0, 1)"));
    }
    let mut acc: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for chain in chains {
        let skip = (chain.samples.len() as f64 * burn_in_frac).floor() as usize;
        for sample in chain.samples.iter().skip(skip) {
            let acc = acc.get_or_insert_with(|| vec![0.0; sample.len()]);
            for (a, &v) in acc.iter_mut().zip(sample.values()) {
                *a += transform.apply(v);
            }
            count += 1;
        }
    }
    let Some(mut acc) = acc else {
        return Err(Error::invalid("no post-burn-in samples"));
    };
    for a in acc.iter_mut() {
        *a /= count as f64;
    }
    NodalField::new(acc, crate::fem::FieldRole::Parameter)
}

/// Number of samples that survive burn-in across chains.
pub fn post_burn_in_count(chains: &[ChainRecord], burn_in_frac: f64) -> usize {
    chains
        .iter()
        .map(|c| {
            let skip = (c.samples.len() as f64 * burn_in_frac).floor() as usize;
            c.samples.len() - skip
        })
        .sum()
}
