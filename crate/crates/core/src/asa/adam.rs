use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam moments for one parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of element updates skipped because of a non-finite gradient.
    pub skipped: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            skipped: 0,
        }
    }

    pub fn reset(&mut self) {
        *self = AdamState::new(self.m.len());
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        adam_step(self, params, grads, lr)
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam shapes differ: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        if !g.is_finite() {
            state.skipped += 1;
            continue;
        }
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut s = AdamState::new(2);
        let mut p = [1.0, -2.0];
        s.step(&mut p, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, [1.0, -2.0]);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut s = AdamState::new(3);
        let mut p = [0.0; 3];
        s.step(&mut p, &[3.0, -0.01, 250.0], 0.1).unwrap();
        for (got, want) in p.iter().zip([-0.1, 0.1, -0.1]) {
            assert!((got - want).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_gradient_skipped() {
        let mut s = AdamState::new(2);
        let mut p = [1.0, 1.0];
        s.step(&mut p, &[f64::NAN, 1.0], 0.1).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 1.0);
        assert_eq!(s.skipped, 1);
    }

    #[test]
    fn converges_on_parabola() {
        let mut s = AdamState::new(1);
        let mut x = [1.0];
        for _ in 0..100 {
            let g = [2.0 * x[0]];
            s.step(&mut x, &g, 0.1).unwrap();
        }
        assert!(x[0].abs() < 0.05, "x = {}", x[0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2);
        assert!(s.step(&mut [0.0; 2], &[0.0; 3], 0.1).is_err());
    }
}
