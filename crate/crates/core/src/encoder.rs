//! Topic encoder (two affine maps around a rectifier) and its autoencoder
//! variant, which adds a mirrored decoder back to the input width.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{relu, relu_backward, Linear, LinearGrad};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    Encoder,
    Autoencoder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_dim: usize,
    pub mode: EncoderMode,
    pub recon_weight: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            in_dim: 300,
            out_dim: 200,
            hidden_dim: 256,
            mode: EncoderMode::Encoder,
            recon_weight: 1.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.out_dim == 0 || self.out_dim >= self.in_dim {
            return Err(Error::Config(format!(
                "encoder out_dim {} must be in 1..in_dim ({})",
                self.out_dim, self.in_dim
            )));
        }
        if self.hidden_dim < self.out_dim {
            return Err(Error::Config(format!(
                "encoder hidden_dim {} must be >= out_dim {}",
                self.hidden_dim, self.out_dim
            )));
        }
        if !(self.recon_weight >= 0.0 && self.recon_weight.is_finite()) {
            return Err(Error::Config("recon_weight must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoder {
    pub first: Linear,
    pub second: Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub first: Linear,
    pub second: Linear,
    pub decoder: Option<Decoder>,
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let first = Linear::init_uniform(config.in_dim, config.hidden_dim, rng);
        let second = Linear::init_uniform(config.hidden_dim, config.out_dim, rng);
        let decoder = match config.mode {
            EncoderMode::Encoder => None,
            EncoderMode::Autoencoder => Some(Decoder {
                first: Linear::init_uniform(config.out_dim, config.hidden_dim, rng),
                second: Linear::init_uniform(config.hidden_dim, config.in_dim, rng),
            }),
        };
        Ok(EncoderParams {
            first,
            second,
            decoder,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.first.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.second.out_dim
    }

    pub fn zero_grad(&self) -> EncoderGrad {
        EncoderGrad {
            first: self.first.zero_grad(),
            second: self.second.zero_grad(),
            decoder: self
                .decoder
                .as_ref()
                .map(|d| (d.first.zero_grad(), d.second.zero_grad())),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.first.is_finite()
            && self.second.is_finite()
            && self
                .decoder
                .as_ref()
                .is_none_or(|d| d.first.is_finite() && d.second.is_finite())
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.first.check_shapes()?;
        self.second.check_shapes()?;
        let chained = |a: &Linear, b: &Linear| {
            if a.out_dim == b.in_dim {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: a.out_dim,
                    got: b.in_dim,
                })
            }
        };
        chained(&self.first, &self.second)?;
        if let Some(d) = &self.decoder {
            d.first.check_shapes()?;
            d.second.check_shapes()?;
            chained(&self.second, &d.first)?;
            chained(&d.first, &d.second)?;
            if d.second.out_dim != self.first.in_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.first.in_dim,
                    got: d.second.out_dim,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderGrad {
    pub first: LinearGrad,
    pub second: LinearGrad,
    pub decoder: Option<(LinearGrad, LinearGrad)>,
}

impl EncoderGrad {
    pub fn scale(&mut self, s: f64) {
        self.first.scale(s);
        self.second.scale(s);
        if let Some((a, b)) = &mut self.decoder {
            a.scale(s);
            b.scale(s);
        }
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    pub input: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub code: Vec<f64>,
    decoder: Option<DecoderTrace>,
}

#[derive(Clone, Debug)]
struct DecoderTrace {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    recon: Vec<f64>,
}

impl EncoderTrace {
    pub fn recon(&self) -> Option<&[f64]> {
        self.decoder.as_ref().map(|d| d.recon.as_slice())
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("input vector has non-finite components".into()))
    }
}

/// Runs the encoder and, when present, the decoder.
pub fn forward(v: &[f64], params: &EncoderParams) -> Result<EncoderTrace> {
    params.first.check_input(v)?;
    check_finite(v)?;
    let hidden_pre = params.first.forward(v);
    let hidden = relu(&hidden_pre);
    let code = params.second.forward(&hidden);
    let decoder = params.decoder.as_ref().map(|d| {
        let hidden_pre = d.first.forward(&code);
        let hidden = relu(&hidden_pre);
        let recon = d.second.forward(&hidden);
        DecoderTrace {
            hidden_pre,
            hidden,
            recon,
        }
    });
    Ok(EncoderTrace {
        input: v.to_vec(),
        hidden_pre,
        hidden,
        code,
        decoder,
    })
}

/// Maps a topic mean vector to its `out_dim` representation.
pub fn encode(v: &[f64], params: &EncoderParams) -> Result<Vec<f64>> {
    params.first.check_input(v)?;
    check_finite(v)?;
    Ok(params.second.forward(&relu(&params.first.forward(v))))
}

/// Returns `(code, reconstruction)`. Requires autoencoder parameters.
pub fn autoencode(v: &[f64], params: &EncoderParams) -> Result<(Vec<f64>, Vec<f64>)> {
    if params.decoder.is_none() {
        return Err(Error::InvalidArgument("encoder has no decoder".into()));
    }
    let trace = forward(v, params)?;
    let recon = trace.recon().expect("decoder present").to_vec();
    Ok((trace.code, recon))
}

/// Mean squared error over components.
pub fn reconstruction_loss(v: &[f64], recon: &[f64]) -> Result<f64> {
    if v.len() != recon.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: recon.len(),
        });
    }
    if v.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = v.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / v.len() as f64)
}

/// Backpropagates `grad_code` (from the classifier) plus
/// `recon_weight * reconstruction_loss` when the decoder is present.
/// Accumulates into `grad`.
pub fn backward(
    trace: &EncoderTrace,
    params: &EncoderParams,
    grad_code: &[f64],
    recon_weight: f64,
    grad: &mut EncoderGrad,
) {
    let mut g_code = grad_code.to_vec();
    if let (Some(d), Some(dt), Some((g1, g2))) =
        (&params.decoder, &trace.decoder, grad.decoder.as_mut())
    {
        if recon_weight != 0.0 {
            let n = trace.input.len() as f64;
            let g_recon: Vec<f64> = dt
                .recon
                .iter()
                .zip(&trace.input)
                .map(|(r, x)| recon_weight * 2.0 * (r - x) / n)
                .collect();
            let g_hidden = d.second.backward(&dt.hidden, &g_recon, g2);
            let g_hidden_pre = relu_backward(&dt.hidden_pre, &g_hidden);
            let g_from_decoder = d.first.backward(&trace.code, &g_hidden_pre, g1);
            for (a, b) in g_code.iter_mut().zip(g_from_decoder) {
                *a += b;
            }
        }
    }
    let g_hidden = params.second.backward(&trace.hidden, &g_code, &mut grad.second);
    let g_hidden_pre = relu_backward(&trace.hidden_pre, &g_hidden);
    params.first.backward(&trace.input, &g_hidden_pre, &mut grad.first);
}
