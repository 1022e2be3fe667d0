//! Adam with dense and row-sparse parameter groups.
//!
//! Sparse rows (backbone token rows) are updated only on steps where they
//! receive a gradient, with bias correction from the global step count.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Moments {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

pub type SparseMoments = HashMap<u64, Moments>;

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
        }
    }

    /// Advances the step counter; call once per optimizer step before updates.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&self, params: &mut [f64], grads: &[f64], state: &mut Moments) {
        if state.m.len() != params.len() {
            *state = Moments::new(params.len());
        }
        let t = self.step.max(1) as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g;
            state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = state.m[i] / c1;
            let v_hat = state.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(0.1);
        adam.begin_step();
        let mut p = vec![1.0, -1.0];
        let mut s = Moments::default();
        adam.update(&mut p, &[2.0, -0.5], &mut s);
        assert!((p[0] - 0.9).abs() < 1e-7);
        assert!((p[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = Adam::new(0.05);
        let mut p = vec![3.0];
        let mut s = Moments::default();
        for _ in 0..500 {
            adam.begin_step();
            let g = vec![2.0 * (p[0] - 1.0)];
            adam.update(&mut p, &g, &mut s);
        }
        assert!((p[0] - 1.0).abs() < 1e-2);
    }
}
