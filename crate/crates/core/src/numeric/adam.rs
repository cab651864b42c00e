use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam optimizer state for one flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::dims("adam parameters", self.len(), params.len()));
        }
        if grad.len() != self.len() {
            return Err(Error::dims("adam gradient", self.len(), grad.len()));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Value-semantics form of [`AdamState::step`].
pub fn adam_step(
    mut state: AdamState,
    mut params: Vec<f64>,
    grad: &[f64],
) -> Result<(AdamState, Vec<f64>)> {
    state.step(&mut params, grad)?;
    Ok((state, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let params = vec![0.3, -1.7, 2.0];
        let (state, out) = adam_step(AdamState::new(3, 0.1), params.clone(), &[0.0; 3]).unwrap();
        assert_eq!(out, params);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut state = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        for _ in 0..500 {
            let g = [2.0 * (p[0] - 3.0)];
            state.step(&mut p, &g).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "p = {}", p[0]);
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let mut state = AdamState::new(1, 0.01);
        let mut p = vec![1.0];
        let mut prev = p[0];
        for _ in 0..2 {
            state.step(&mut p, &[0.5]).unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
    }

    #[test]
    fn length_mismatch_is_error() {
        let mut state = AdamState::new(2, 0.1);
        assert!(state.step(&mut [0.0, 0.0], &[1.0]).is_err());
        assert!(state.step(&mut [0.0], &[1.0, 1.0]).is_err());
    }
}
