//! Knowledge fusion, the classification head and its loss.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Leaning;
use crate::error::{Error, Result};
use crate::layers::{Linear, LinearGrad};

pub const NUM_CLASSES: usize = 3;

pub const HEAD_BIAS_INIT: f64 = 1.0;

/// Per-article vectors: base (delta), Wikipedia (omega), topic (tau), the
/// beta-weighted knowledge block (lambda) and the classifier input (theta).
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationBundle {
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `lambda = [beta * omega] ++ [(1 - beta) * tau]`, `theta = delta ++ lambda`.
pub fn fuse(delta: &[f64], omega: &[f64], tau: &[f64], beta: f64) -> Result<RepresentationBundle> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    if omega.len() != delta.len() {
        return Err(Error::DimensionMismatch {
            expected: delta.len(),
            got: omega.len(),
        });
    }
    let mut lambda = Vec::with_capacity(omega.len() + tau.len());
    lambda.extend(omega.iter().map(|x| beta * x));
    lambda.extend(tau.iter().map(|x| (1.0 - beta) * x));
    let mut theta = Vec::with_capacity(delta.len() + lambda.len());
    theta.extend_from_slice(delta);
    theta.extend_from_slice(&lambda);
    Ok(RepresentationBundle {
        delta: delta.to_vec(),
        omega: omega.to_vec(),
        tau: tau.to_vec(),
        lambda,
        theta,
    })
}

/// Width of theta for backbone width `q` and topic width `r`.
pub fn theta_dim(q: usize, r: usize) -> usize {
    2 * q + r
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Softmax cross-entropy over `ReLU(W theta + b)`.
    #[default]
    PaperRelu,
    /// Softmax cross-entropy over `W theta + b`.
    PlainLinear,
}

/// Fully connected layer from theta to the three leaning scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub layer: Linear,
}

impl ClassifierHead {
    /// Fan-in scaled uniform weights; every bias starts at [`HEAD_BIAS_INIT`]
    /// so the rectified scores begin in their active region.
    pub fn init<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        let mut layer = Linear::init_uniform(p, NUM_CLASSES, rng);
        layer.bias.fill(HEAD_BIAS_INIT);
        ClassifierHead { layer }
    }

    pub fn from_parts(weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != NUM_CLASSES || !weight.len().is_multiple_of(NUM_CLASSES) {
            return Err(Error::DimensionMismatch {
                expected: NUM_CLASSES,
                got: bias.len(),
            });
        }
        Ok(ClassifierHead {
            layer: Linear {
                in_dim: weight.len() / NUM_CLASSES,
                out_dim: NUM_CLASSES,
                weight,
                bias,
            },
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer.in_dim
    }

    /// Pre-rectifier logits `W theta + b`.
    pub fn logits(&self, theta: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        self.layer.check_input(theta)?;
        let z = self.layer.forward(theta);
        Ok([z[0], z[1], z[2]])
    }
}

fn apply_mode(z: [f64; NUM_CLASSES], mode: HeadMode) -> [f64; NUM_CLASSES] {
    match mode {
        HeadMode::PaperRelu => z.map(|v| v.max(0.0)),
        HeadMode::PlainLinear => z,
    }
}

/// Scores for each leaning (non-negative under [`HeadMode::PaperRelu`]).
pub fn classify(theta: &[f64], head: &ClassifierHead, mode: HeadMode) -> Result<[f64; NUM_CLASSES]> {
    Ok(apply_mode(head.logits(theta)?, mode))
}

/// Argmax; ties go to the lowest class code.
pub fn predict(scores: &[f64; NUM_CLASSES]) -> Leaning {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Leaning::from_code(best).expect("three classes")
}

pub fn softmax(scores: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = scores.map(|s| (s - max).exp());
    let z: f64 = e.iter().sum();
    e.map(|x| x / z)
}

/// Cross-entropy of `softmax(scores)` against the one-hot label.
pub fn loss(scores: &[f64; NUM_CLASSES], label: Leaning) -> f64 {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[label.code()]
}

pub fn batch_loss(scores: &[[f64; NUM_CLASSES]], labels: &[Leaning]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().zip(labels).map(|(s, &l)| loss(s, l)).sum::<f64>() / scores.len() as f64
}

/// Gradient of `loss(classify(theta))` for one example. Accumulates
/// `scale * dL/dW, dL/db` into `grad` and returns `scale * dL/dtheta`.
pub fn head_backward(
    theta: &[f64],
    head: &ClassifierHead,
    mode: HeadMode,
    label: Leaning,
    scale: f64,
    grad: &mut LinearGrad,
) -> Result<(f64, Vec<f64>)> {
    let z = head.logits(theta)?;
    let scores = apply_mode(z, mode);
    let value = loss(&scores, label);
    let p = softmax(&scores);
    let mut g = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let onehot = if c == label.code() { 1.0 } else { 0.0 };
        let gate = match mode {
            HeadMode::PaperRelu if z[c] <= 0.0 => 0.0,
            _ => 1.0,
        };
        g[c] = scale * (p[c] - onehot) * gate;
    }
    let grad_theta = head.layer.backward(theta, &g, grad);
    Ok((value, grad_theta))
}
