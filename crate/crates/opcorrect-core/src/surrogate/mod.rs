//! Reduced-basis neural operator: derivative-informed input subspace, POD
//! output subspace, and a low-rank ResNet coefficient map between them.

pub mod adam;
pub mod derivative_basis;
pub mod pod;
pub mod resnet;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use derivative_basis::{
    compute_derivative_basis, compute_derivative_basis_with_solutions, DerivativeBasis,
};
pub use pod::{compute_pod, PodResult};
pub use resnet::{Gradients, ResNetSurrogate, ResidualBlock};
pub use train::{train_adaptive, ArchConfig, EpochRecord, TrainOutcome, TrainingSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::{NodalField, SparseMatrix};

/// Mass-orthonormal input/output bases with input whitening factors.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    /// d_m x r_in, mass-orthonormal.
    pub input_basis: DMatrix<f64>,
    /// Per-coordinate whitening scales (standard deviations over training
    /// inputs); identity until [`ReducedBasis::fit_input_scales`] runs.
    pub input_scales: Vec<f64>,
    /// Centering field for the input encoding (the prior mean).
    pub input_center: NodalField,
    /// d_u x r_out, mass-orthonormal.
    pub output_basis: DMatrix<f64>,
    pub output_mean: NodalField,
    pub input_eigenvalues: Vec<f64>,
    pub output_eigenvalues: Vec<f64>,
}

impl ReducedBasis {
    pub fn new(input: DerivativeBasis, output: PodResult, input_center: NodalField) -> Self {
        let r_in = input.basis.ncols();
        let r_out = output.basis.ncols();
        // retain exactly one eigenvalue per basis column (diagnostics)
        let mut input_eigenvalues = input.eigenvalues;
        input_eigenvalues.resize(r_in, 0.0);
        let mut output_eigenvalues = output.eigenvalues;
        output_eigenvalues.resize(r_out, 0.0);
        Self {
            input_basis: input.basis,
            input_scales: vec![1.0; r_in],
            input_center,
            output_basis: output.basis,
            output_mean: output.mean,
            input_eigenvalues,
            output_eigenvalues,
        }
    }

    pub fn r_in(&self) -> usize {
        self.input_basis.ncols()
    }

    pub fn r_out(&self) -> usize {
        self.output_basis.ncols()
    }

    fn check_param_dim(&self, m: &NodalField) -> Result<()> {
        if m.len() != self.input_basis.nrows() {
            return Err(Error::invalid("parameter dimension mismatch"));
        }
        Ok(())
    }

    /// Unwhitened input coordinates `V' M (m - center)`.
    fn raw_input_coords(&self, mass: &SparseMatrix, m: &NodalField) -> Result<Vec<f64>> {
        self.check_param_dim(m)?;
        let centered: Vec<f64> = m
            .values()
            .iter()
            .zip(self.input_center.values())
            .map(|(a, b)| a - b)
            .collect();
        let mc = mass.matvec_alloc(&centered);
        let coords = self.input_basis.transpose() * DVector::from_vec(mc);
        Ok(coords.as_slice().to_vec())
    }

    /// Whitened input coordinates `diag(scales)^{-1} V' M (m - center)`.
    pub fn encode_input(&self, mass: &SparseMatrix, m: &NodalField) -> Result<Vec<f64>> {
        let mut coords = self.raw_input_coords(mass, m)?;
        for (c, s) in coords.iter_mut().zip(&self.input_scales) {
            *c /= s;
        }
        Ok(coords)
    }

    /// Output coordinates of a state snapshot, `V_out' M (u - mean)`.
    pub fn encode_output(&self, mass: &SparseMatrix, u: &NodalField) -> Result<Vec<f64>> {
        if u.len() != self.output_basis.nrows() {
            return Err(Error::invalid("state dimension mismatch"));
        }
        let centered: Vec<f64> = u
            .values()
            .iter()
            .zip(self.output_mean.values())
            .map(|(a, b)| a - b)
            .collect();
        let mc = mass.matvec_alloc(&centered);
        let coords = self.output_basis.transpose() * DVector::from_vec(mc);
        Ok(coords.as_slice().to_vec())
    }

    /// `mean + V_out coords`.
    pub fn decode_output(&self, coords: &[f64]) -> Result<NodalField> {
        if coords.len() != self.r_out() {
            return Err(Error::invalid("output coordinate dimension mismatch"));
        }
        let v = &self.output_basis * DVector::from_column_slice(coords);
        let values: Vec<f64> = v
            .iter()
            .zip(self.output_mean.values())
            .map(|(a, b)| a + b)
            .collect();
        NodalField::new(values, self.output_mean.role())
    }

    /// Set the whitening scales to the per-coordinate standard deviation of
    /// the raw input coordinates over `ms` (degenerate coordinates keep 1).
    pub fn fit_input_scales(&mut self, mass: &SparseMatrix, ms: &[NodalField]) -> Result<()> {
        if ms.len() < 2 {
            return Err(Error::invalid("need at least two fields to fit scales"));
        }
        self.input_scales = vec![1.0; self.r_in()];
        let coords: Vec<Vec<f64>> = ms
            .iter()
            .map(|m| self.raw_input_coords(mass, m))
            .collect::<Result<_>>()?;
        let n = coords.len() as f64;
        for k in 0..self.r_in() {
            let mean: f64 = coords.iter().map(|c| c[k]).sum::<f64>() / n;
            let var: f64 = coords.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                self.input_scales[k] = var.sqrt();
            }
        }
        Ok(())
    }

    /// Full surrogate evaluation: encode, run the network, decode.
    pub fn predict(
        &self,
        net: &ResNetSurrogate,
        mass: &SparseMatrix,
        m: &NodalField,
    ) -> Result<NodalField> {
        let coords = self.encode_input(mass, m)?;
        let out = net.forward(&coords);
        self.decode_output(&out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateNorm {
    L2,
    H1,
}

/// Relative accuracy percentage of an approximate state map against an
/// oracle over a test set: `100 (1 - mean(|F(m) - F~(m)| / |F(m)|))`.
/// `stiffness` is the unit-coefficient stiffness used for the H1 norm.
pub fn generalization_accuracy(
    approx: &mut dyn FnMut(&NodalField) -> Result<NodalField>,
    oracle: &mut dyn FnMut(&NodalField) -> Result<NodalField>,
    test_ms: &[NodalField],
    mass: &SparseMatrix,
    stiffness: &SparseMatrix,
    norm: StateNorm,
) -> Result<f64> {
    if test_ms.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let field_norm = |f: &[f64]| -> f64 {
        let l2sq = mass.quadratic_form(f).max(0.0);
        match norm {
            StateNorm::L2 => l2sq.sqrt(),
            StateNorm::H1 => (l2sq + stiffness.quadratic_form(f).max(0.0)).sqrt(),
        }
    };
    let mut acc = 0.0;
    for m in test_ms {
        let truth = oracle(m)?;
        let guess = approx(m)?;
        let diff: Vec<f64> = truth
            .values()
            .iter()
            .zip(guess.values())
            .map(|(a, b)| a - b)
            .collect();
        let denom = field_norm(truth.values());
        if denom == 0.0 {
            return Err(Error::invalid("oracle state has zero norm"));
        }
        acc += field_norm(&diff) / denom;
    }
    Ok(100.0 * (1.0 - acc / test_ms.len() as f64))
}
