use serde::{Deserialize, Serialize};

use super::{check_len, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
    check_len("adam_step params", params.len(), state.len())?;
    check_len("adam_step grads", grads.len(), state.len())?;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut s, &mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::new(2, AdamConfig::default());
        let mut p = vec![0.0, 3.0];
        adam_step(&mut s, &mut p, &[1.0, 1.0]).unwrap();
        let expected = 1e-3 / (1.0 + 1e-8);
        assert!((p[0] + expected).abs() < 1e-15);
        assert!((p[1] - (3.0 - expected)).abs() < 1e-15);
    }

    #[test]
    fn two_steps_reduce_quadratic() {
        // f(x) = (x − 2)², f'(x) = 2(x − 2)
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(1, cfg);
        let mut x = vec![5.0];
        let f = |x: f64| (x - 2.0) * (x - 2.0);
        let f0 = f(x[0]);
        let g = [2.0 * (x[0] - 2.0)];
        adam_step(&mut s, &mut x, &g).unwrap();
        let f1 = f(x[0]);
        let g = [2.0 * (x[0] - 2.0)];
        adam_step(&mut s, &mut x, &g).unwrap();
        let f2 = f(x[0]);
        assert!(f1 < f0 && f2 < f1);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2, AdamConfig::default());
        assert!(adam_step(&mut s, &mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
