//! Adam optimizer on flat parameter vectors.

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates plus the step counter for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update in place. Rejects nonfinite gradients.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid("adam shapes do not match"));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("nonfinite gradient"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 1e-3).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn rejects_nonfinite_gradient() {
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        assert!(adam_step(&mut p, &[f64::NAN], &mut s, 1e-3).is_err());
    }

    #[test]
    fn first_step_moves_by_lr_in_gradient_sign() {
        // bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
        // lr * g / (|g| + eps) ~ lr * sign(g)
        for &g in &[0.37, -81.0, 1e-3] {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            adam_step(&mut p, &[g], &mut s, 0.01).unwrap();
            assert!((p[0] + 0.01 * g.signum()).abs() < 1e-6, "g={g}, p={}", p[0]);
        }
    }

    #[test]
    fn matches_reference_recursion_on_scalar_quadratic() {
        // independent reference implementation of the textbook recursion
        let lr = 0.1;
        let mut x_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=200 {
            let g = 2.0 * x_ref;
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g;
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g;
            let mh = m / (1.0 - ADAM_BETA1.powi(t));
            let vh = v / (1.0 - ADAM_BETA2.powi(t));
            x_ref -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }

        let mut p = vec![1.0f64];
        let mut s = AdamState::new(1);
        for _ in 0..200 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &mut s, lr).unwrap();
        }
        assert!((p[0] - x_ref).abs() < 1e-12);
        assert!(p[0].abs() <= 1e-2, "x after 200 steps: {}", p[0]);
    }
}
