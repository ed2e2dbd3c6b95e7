//! Low-rank residual network on reduced coordinates.
//!
//! The map is `input_linear -> residual blocks -> output_linear` with blocks
//!
//! ```text
//! z <- z + U softplus(V z + b),   U: latent x k,  V: k x latent.
//! ```
//!
//! The latent width equals the input dimension. Gradients are computed by
//! hand-rolled reverse-mode accumulation; softplus keeps the map smooth, so
//! finite differences validate the backprop path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    /// latent x k
    pub u: DMatrix<f64>,
    /// k x latent
    pub v: DMatrix<f64>,
    /// k
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResNetSurrogate {
    pub r_in: usize,
    pub r_out: usize,
    pub layer_rank: usize,
    pub input_weight: DMatrix<f64>,
    pub input_bias: DVector<f64>,
    pub layers: Vec<ResidualBlock>,
    pub output_weight: DMatrix<f64>,
    pub output_bias: DVector<f64>,
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    // stable: ln(1 + e^x) = max(x, 0) + ln(1 + e^{-|x|})
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ResNetSurrogate {
    /// Network with `n_layers` zero blocks: the input map is the identity,
    /// blocks have `U = 0` (exact identities), and the output map is zero,
    /// so an untrained network predicts zero coordinates. `V` is seeded with
    /// unit-variance Gaussians scaled by `1/sqrt(latent)` so that appended
    /// blocks receive gradient signal.
    pub fn new(
        r_in: usize,
        r_out: usize,
        layer_rank: usize,
        n_layers: usize,
        rng: &mut RngStream,
    ) -> Self {
        let mut net = Self {
            r_in,
            r_out,
            layer_rank,
            input_weight: DMatrix::identity(r_in, r_in),
            input_bias: DVector::zeros(r_in),
            layers: Vec::new(),
            output_weight: DMatrix::zeros(r_out, r_in),
            output_bias: DVector::zeros(r_out),
        };
        for _ in 0..n_layers {
            net.append_zero_layer(rng);
        }
        net
    }

    /// Append a block that is exactly the identity (`U = 0`). Existing
    /// predictions are unchanged.
    pub fn append_zero_layer(&mut self, rng: &mut RngStream) {
        let latent = self.r_in;
        let k = self.layer_rank;
        let scale = 1.0 / (latent as f64).sqrt();
        let v = DMatrix::from_fn(k, latent, |_, _| scale * rng.normal());
        self.layers.push(ResidualBlock {
            u: DMatrix::zeros(latent, k),
            v,
            b: DVector::zeros(k),
        });
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, coords_in: &[f64]) -> Vec<f64> {
        assert_eq!(coords_in.len(), self.r_in);
        let x = DVector::from_column_slice(coords_in);
        let mut z = &self.input_weight * x + &self.input_bias;
        for layer in &self.layers {
            let a = &layer.v * &z + &layer.b;
            let s = a.map(softplus);
            z += &layer.u * s;
        }
        let out = &self.output_weight * z + &self.output_bias;
        out.as_slice().to_vec()
    }

    /// Mean squared error over output coordinates for one (input, target)
    /// pair, and its gradient with respect to all parameters, accumulated
    /// into `grads`.
    pub fn backprop(&self, input: &[f64], target: &[f64], grads: &mut Gradients) -> f64 {
        assert_eq!(target.len(), self.r_out);
        let x = DVector::from_column_slice(input);
        let mut z = &self.input_weight * &x + &self.input_bias;

        // forward pass, caching block inputs and activations
        let mut cache = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z_in = z.clone();
            let a = &layer.v * &z + &layer.b;
            let s = a.map(softplus);
            z += &layer.u * &s;
            cache.push((z_in, a, s));
        }
        let out = &self.output_weight * &z + &self.output_bias;

        let r_out = self.r_out as f64;
        let mut loss = 0.0;
        let mut dout = DVector::zeros(self.r_out);
        for i in 0..self.r_out {
            let e = out[i] - target[i];
            loss += e * e / r_out;
            dout[i] = 2.0 * e / r_out;
        }

        grads.output_weight += &dout * z.transpose();
        grads.output_bias += &dout;
        let mut dz = self.output_weight.transpose() * dout;

        for (layer, glayer, (z_in, a, s)) in self
            .layers
            .iter()
            .zip(&mut grads.layers)
            .zip(&cache)
            .rev()
            .map(|((l, g), c)| (l, g, c))
        {
            glayer.u += &dz * s.transpose();
            let ds = layer.u.transpose() * &dz;
            let da = ds.zip_map(a, |d, ai| d * sigmoid(ai));
            glayer.v += &da * z_in.transpose();
            glayer.b += &da;
            dz += layer.v.transpose() * da;
        }

        grads.input_weight += &dz * x.transpose();
        grads.input_bias += &dz;
        loss
    }

    pub fn n_params(&self) -> usize {
        let latent = self.r_in;
        let per_layer = latent * self.layer_rank * 2 + self.layer_rank;
        self.r_in * self.r_in
            + self.r_in
            + self.layers.len() * per_layer
            + self.r_out * latent
            + self.r_out
    }

    /// Flatten all parameters in a fixed documented order: input weight
    /// (column-major), input bias, per layer U, V (column-major), b, output
    /// weight (column-major), output bias.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(self.input_weight.as_slice());
        p.extend_from_slice(self.input_bias.as_slice());
        for layer in &self.layers {
            p.extend_from_slice(layer.u.as_slice());
            p.extend_from_slice(layer.v.as_slice());
            p.extend_from_slice(layer.b.as_slice());
        }
        p.extend_from_slice(self.output_weight.as_slice());
        p.extend_from_slice(self.output_bias.as_slice());
        p
    }

    /// Inverse of [`Self::to_params`], keeping the architecture.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::invalid("parameter vector length mismatch"));
        }
        let latent = self.r_in;
        let k = self.layer_rank;
        let mut off = 0;
        let mut take = |n: usize| {
            let s = &params[off..off + n];
            off += n;
            s
        };
        self.input_weight
            .as_mut_slice()
            .copy_from_slice(take(latent * latent));
        self.input_bias.as_mut_slice().copy_from_slice(take(latent));
        for layer in &mut self.layers {
            layer.u.as_mut_slice().copy_from_slice(take(latent * k));
            layer.v.as_mut_slice().copy_from_slice(take(k * latent));
            layer.b.as_mut_slice().copy_from_slice(take(k));
        }
        self.output_weight
            .as_mut_slice()
            .copy_from_slice(take(self.r_out * latent));
        self.output_bias
            .as_mut_slice()
            .copy_from_slice(take(self.r_out));
        Ok(())
    }
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub input_weight: DMatrix<f64>,
    pub input_bias: DVector<f64>,
    pub layers: Vec<ResidualBlock>,
    pub output_weight: DMatrix<f64>,
    pub output_bias: DVector<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &ResNetSurrogate) -> Self {
        Self {
            input_weight: DMatrix::zeros(net.r_in, net.r_in),
            input_bias: DVector::zeros(net.r_in),
            layers: net
                .layers
                .iter()
                .map(|l| ResidualBlock {
                    u: DMatrix::zeros(l.u.nrows(), l.u.ncols()),
                    v: DMatrix::zeros(l.v.nrows(), l.v.ncols()),
                    b: DVector::zeros(l.b.len()),
                })
                .collect(),
            output_weight: DMatrix::zeros(net.r_out, net.r_in),
            output_bias: DVector::zeros(net.r_out),
        }
    }

    pub fn clear(&mut self) {
        self.input_weight.fill(0.0);
        self.input_bias.fill(0.0);
        for l in &mut self.layers {
            l.u.fill(0.0);
            l.v.fill(0.0);
            l.b.fill(0.0);
        }
        self.output_weight.fill(0.0);
        self.output_bias.fill(0.0);
    }

    pub fn scale(&mut self, s: f64) {
        self.input_weight *= s;
        self.input_bias *= s;
        for l in &mut self.layers {
            l.u *= s;
            l.v *= s;
            l.b *= s;
        }
        self.output_weight *= s;
        self.output_bias *= s;
    }

    /// Same flat order as [`ResNetSurrogate::to_params`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend_from_slice(self.input_weight.as_slice());
        p.extend_from_slice(self.input_bias.as_slice());
        for layer in &self.layers {
            p.extend_from_slice(layer.u.as_slice());
            p.extend_from_slice(layer.v.as_slice());
            p.extend_from_slice(layer.b.as_slice());
        }
        p.extend_from_slice(self.output_weight.as_slice());
        p.extend_from_slice(self.output_bias.as_slice());
        p
    }
}
