//! Dense affine layers with hand-written backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = W x + b` with `W` stored row-major as `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `[-1/sqrt(in_dim), 1/sqrt(in_dim)]` for weights and biases.
    pub fn init_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        let weight = (0..in_dim * out_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        Linear {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.in_dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.in_dim,
                got: x.len(),
            })
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.weight.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim * self.out_dim + self.out_dim,
                got: self.weight.len() + self.bias.len(),
            });
        }
        Ok(())
    }

    /// Caller guarantees `x.len() == in_dim`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim.max(1))
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .take(self.out_dim)
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns dL/dx.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut LinearGrad) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.in_dim];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                grad_in[i] += g * row[i];
            }
        }
        grad_in
    }

    pub fn zero_grad(&self) -> LinearGrad {
        LinearGrad {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|x| x.is_finite())
    }
}

impl LinearGrad {
    pub fn scale(&mut self, s: f64) {
        self.weight.iter_mut().chain(self.bias.iter_mut()).for_each(|x| *x *= s);
    }
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient through a rectifier given its pre-activation.
pub fn relu_backward(pre: &[f64], grad_out: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(grad_out)
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_backward_by_hand() {
        let l = Linear {
            in_dim: 2,
            out_dim: 2,
            weight: vec![1.0, 2.0, -1.0, 0.5],
            bias: vec![0.1, -0.2],
        };
        assert_eq!(l.forward(&[3.0, 1.0]), vec![5.1, -2.7]);
        let mut g = l.zero_grad();
        let gin = l.backward(&[3.0, 1.0], &[1.0, 2.0], &mut g);
        assert_eq!(g.weight, vec![3.0, 1.0, 6.0, 2.0]);
        assert_eq!(g.bias, vec![1.0, 2.0]);
        assert_eq!(gin, vec![-1.0, 3.0]);
    }

    #[test]
    fn relu_gates() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu_backward(&[-1.0, 0.0, 2.0], &[5.0, 5.0, 5.0]), vec![0.0, 0.0, 5.0]);
    }
}
