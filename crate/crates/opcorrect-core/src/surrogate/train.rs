//! Stagewise training of the reduced-coordinate ResNet.
//!
//! The network is grown and trained adaptively: start at two residual
//! blocks, run a fixed number of Adam epochs, append a zero-initialized
//! block (which leaves predictions unchanged), and repeat up to the layer
//! budget; a final end-to-end pass follows. The returned weights are the
//! ones with the best held-out loss seen anywhere in the schedule.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::surrogate::adam::{adam_step, AdamState};
use crate::surrogate::resnet::{Gradients, ResNetSurrogate};

/// Reduced-coordinate training pairs with a held-out split.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub n_heldout: usize,
}

impl TrainingSet {
    /// Split the pairs into a training front and a held-out tail of
    /// `heldout_frac` (at least one pair stays in training). The pair order
    /// is shuffled first so the split is exchangeable.
    pub fn with_heldout(
        mut inputs: Vec<Vec<f64>>,
        mut outputs: Vec<Vec<f64>>,
        heldout_frac: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(Error::invalid("training set empty or mismatched"));
        }
        if !(0.0..1.0).contains(&heldout_frac) {
            return Err(Error::invalid("heldout fraction must be in [0,1)"));
        }
        let n = inputs.len();
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let permuted_in: Vec<_> = order.iter().map(|&i| inputs[i].clone()).collect();
        let permuted_out: Vec<_> = order.iter().map(|&i| outputs[i].clone()).collect();
        inputs = permuted_in;
        outputs = permuted_out;
        let n_heldout = ((n as f64 * heldout_frac).round() as usize).min(n - 1);
        Ok(Self {
            inputs,
            outputs,
            n_heldout,
        })
    }

    pub fn n_train(&self) -> usize {
        self.inputs.len() - self.n_heldout
    }

    fn train_slice(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        let n = self.n_train();
        (&self.inputs[..n], &self.outputs[..n])
    }

    fn heldout_slice(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        let n = self.n_train();
        (&self.inputs[n..], &self.outputs[n..])
    }
}

#[derive(Debug, Clone)]
pub struct ArchConfig {
    pub r_in: usize,
    pub r_out: usize,
    pub layer_rank: usize,
    pub layers: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs_per_stage: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            r_in: 20,
            r_out: 20,
            layer_rank: 10,
            layers: 10,
            lr: 1e-3,
            batch: 32,
            epochs_per_stage: 100,
        }
    }
}

/// One row per epoch of the training log CSV.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub stage: usize,
    pub epoch: usize,
    pub train_mse: f64,
    pub heldout_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ResNetSurrogate,
    pub log: Vec<EpochRecord>,
    pub best_heldout_mse: f64,
}

/// Mean squared error (over coordinates, averaged over pairs).
pub fn mse_on(net: &ResNetSurrogate, inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> f64 {
    if inputs.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (x, y) in inputs.iter().zip(outputs) {
        let out = net.forward(x);
        acc += out
            .iter()
            .zip(y)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / y.len() as f64;
    }
    acc / inputs.len() as f64
}

/// Run the full growth schedule. Deterministic for a fixed stream: batch
/// order and layer seeds derive from `rng` only.
pub fn train_adaptive(
    training: &TrainingSet,
    arch: &ArchConfig,
    rng: &mut RngStream,
) -> Result<TrainOutcome> {
    if training.inputs.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if arch.batch == 0 || arch.batch > training.n_train() {
        return Err(Error::invalid("batch size must be in [1, n_train]"));
    }
    if arch.layers < 2 {
        return Err(Error::invalid("need at least two layers"));
    }

    let mut net = ResNetSurrogate::new(arch.r_in, arch.r_out, arch.layer_rank, 2, rng);
    let mut log = Vec::new();
    let mut best: Option<(f64, Vec<f64>, usize)> = None;

    let n_stages = arch.layers - 2 + 2; // growth stages plus the final pass
    for stage in 0..n_stages {
        if stage > 0 && net.n_layers() < arch.layers {
            net.append_zero_layer(rng);
        }
        train_stage(&mut net, training, arch, stage, rng, &mut log, &mut best)?;
    }

    let (best_heldout_mse, params, n_layers) =
        best.expect("at least one epoch ran");
    let mut best_net = ResNetSurrogate::new(arch.r_in, arch.r_out, arch.layer_rank, n_layers, rng);
    best_net.set_params(&params)?;
    Ok(TrainOutcome {
        net: best_net,
        log,
        best_heldout_mse,
    })
}

fn train_stage(
    net: &mut ResNetSurrogate,
    training: &TrainingSet,
    arch: &ArchConfig,
    stage: usize,
    rng: &mut RngStream,
    log: &mut Vec<EpochRecord>,
    best: &mut Option<(f64, Vec<f64>, usize)>,
) -> Result<()> {
    let (tx, ty) = training.train_slice();
    let (hx, hy) = training.heldout_slice();
    let n = tx.len();
    let mut state = AdamState::new(net.n_params());
    let mut grads = Gradients::zeros_like(net);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..arch.epochs_per_stage {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(arch.batch) {
            grads.clear();
            let mut batch_loss = 0.0;
            for &idx in chunk {
                batch_loss += net.backprop(&tx[idx], &ty[idx], &mut grads);
            }
            let scale = 1.0 / chunk.len() as f64;
            grads.scale(scale);
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged { stage, epoch });
            }
            let mut params = net.to_params();
            adam_step(&mut params, &grads.to_flat(), &mut state, arch.lr)?;
            net.set_params(&params)?;
            epoch_loss += batch_loss;
            n_batches += 1;
        }
        let train_mse = epoch_loss / n_batches as f64;
        let heldout_mse = if hx.is_empty() {
            train_mse
        } else {
            mse_on(net, hx, hy)
        };
        if !heldout_mse.is_finite() {
            return Err(Error::TrainingDiverged { stage, epoch });
        }
        log.push(EpochRecord {
            stage,
            epoch,
            train_mse,
            heldout_mse,
        });
        let improved = best.as_ref().map_or(true, |(b, _, _)| heldout_mse < *b);
        if improved {
            *best = Some((heldout_mse, net.to_params(), net.n_layers()));
        }
    }
    Ok(())
}
