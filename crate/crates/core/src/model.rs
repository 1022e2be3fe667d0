//! The full classifier: shared backbone, topic encoder and head, with a
//! hand-written backward pass and Adam state for every parameter group.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{Backbone, SparseGrad};
use crate::corpus::Leaning;
use crate::encoder::{self, EncoderConfig, EncoderGrad, EncoderMode, EncoderParams, EncoderTrace};
use crate::error::{Error, Result};
use crate::fusion::{classify, fuse, head_backward, ClassifierHead, HeadMode, NUM_CLASSES};
use crate::layers::{Linear, LinearGrad};
use crate::optim::{Adam, Moments, SparseMoments};
use crate::train::{TopicEncoder, TrainConfig};

/// Inputs for one article, independent of model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticleFeatures {
    pub id: String,
    pub domain: String,
    pub label: Leaning,
    /// `None` zero-fills delta.
    pub article_ids: Option<Vec<u64>>,
    /// `None` zero-fills omega.
    pub wiki_ids: Option<Vec<u64>>,
    /// Topic mean vector; `None` zero-fills tau.
    pub topic_mean: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaningModel {
    pub backbone: Backbone,
    pub encoder: Option<EncoderParams>,
    pub head: ClassifierHead,
    pub head_mode: HeadMode,
    pub beta: f64,
    pub topic_dim: usize,
    pub recon_weight: f64,
}

pub struct Forward {
    pub theta: Vec<f64>,
    pub scores: [f64; NUM_CLASSES],
    trace: Option<EncoderTrace>,
}

pub struct ModelGrad {
    pub backbone: SparseGrad,
    pub encoder: Option<EncoderGrad>,
    pub head: LinearGrad,
}

impl LeaningModel {
    pub fn init<R: Rng + ?Sized>(
        config: &TrainConfig,
        backbone: Backbone,
        embed_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.beta) {
            return Err(Error::BetaOutOfRange(config.beta));
        }
        let mode = match config.topic_encoder {
            TopicEncoder::None => None,
            TopicEncoder::Encoder => Some(EncoderMode::Encoder),
            TopicEncoder::Autoencoder => Some(EncoderMode::Autoencoder),
        };
        let encoder = match mode {
            Some(mode) => Some(EncoderParams::init(
                &EncoderConfig {
                    in_dim: embed_dim,
                    out_dim: config.topic_dim,
                    hidden_dim: config.encoder_hidden_dim,
                    mode,
                    recon_weight: config.recon_weight,
                },
                rng,
            )?),
            None => None,
        };
        let p = 2 * backbone.width + config.topic_dim;
        let head = ClassifierHead::init(p, rng);
        Ok(LeaningModel {
            backbone,
            encoder,
            head,
            head_mode: config.head,
            beta: config.beta,
            topic_dim: config.topic_dim,
            recon_weight: config.recon_weight,
        })
    }

    pub fn q(&self) -> usize {
        self.backbone.width
    }

    fn pooled(&self, ids: Option<&[u64]>) -> Vec<f64> {
        match ids {
            Some(ids) => self.backbone.pool(ids),
            None => vec![0.0; self.q()],
        }
    }

    /// Topic representation tau, zero when the topic path is disabled.
    pub fn topic_code(&self, f: &ArticleFeatures) -> Result<(Vec<f64>, Option<EncoderTrace>)> {
        match (&self.encoder, &f.topic_mean) {
            (Some(enc), Some(m)) => {
                let trace = encoder::forward(m, enc)?;
                Ok((trace.code.clone(), Some(trace)))
            }
            _ => Ok((vec![0.0; self.topic_dim], None)),
        }
    }

    /// Forward pass; `omega` may be supplied from a per-domain cache.
    pub fn forward_with(&self, f: &ArticleFeatures, omega: Option<&[f64]>) -> Result<Forward> {
        let delta = self.pooled(f.article_ids.as_deref());
        let omega = match omega {
            Some(o) => o.to_vec(),
            None => self.pooled(f.wiki_ids.as_deref()),
        };
        let (tau, trace) = self.topic_code(f)?;
        let bundle = fuse(&delta, &omega, &tau, self.beta)?;
        let scores = classify(&bundle.theta, &self.head, self.head_mode)?;
        Ok(Forward {
            theta: bundle.theta,
            scores,
            trace,
        })
    }

    pub fn forward(&self, f: &ArticleFeatures) -> Result<Forward> {
        self.forward_with(f, None)
    }

    pub fn zero_grad(&self) -> ModelGrad {
        ModelGrad {
            backbone: SparseGrad::new(),
            encoder: self.encoder.as_ref().map(|e| e.zero_grad()),
            head: self.head.layer.zero_grad(),
        }
    }

    /// Accumulates `scale * d(objective)/d(params)` for one article and
    /// returns `(cross_entropy, reconstruction_loss)`.
    pub fn accumulate(&self, f: &ArticleFeatures, scale: f64, grad: &mut ModelGrad) -> Result<(f64, f64)> {
        let fw = self.forward(f)?;
        let (ce, g_theta) = head_backward(&fw.theta, &self.head, self.head_mode, f.label, scale, &mut grad.head)?;
        let q = self.q();
        if let Some(ids) = &f.article_ids {
            self.backbone.accumulate_grad(ids, &g_theta[..q], 1.0, &mut grad.backbone);
        }
        if let Some(ids) = &f.wiki_ids {
            self.backbone.accumulate_grad(ids, &g_theta[q..2 * q], self.beta, &mut grad.backbone);
        }
        let mut recon = 0.0;
        if let (Some(enc), Some(trace), Some(g_enc)) = (&self.encoder, &fw.trace, grad.encoder.as_mut()) {
            let g_tau: Vec<f64> = g_theta[2 * q..].iter().map(|g| (1.0 - self.beta) * g).collect();
            if let Some(r) = trace.recon() {
                recon = encoder::reconstruction_loss(&trace.input, r)?;
            }
            encoder::backward(trace, enc, &g_tau, self.recon_weight * scale, g_enc);
        }
        Ok((ce, recon))
    }

    pub fn predict(&self, f: &ArticleFeatures, omega: Option<&[f64]>) -> Result<Leaning> {
        Ok(crate::fusion::predict(&self.forward_with(f, omega)?.scores))
    }

    pub fn is_finite(&self) -> bool {
        self.backbone.is_finite()
            && self.head.layer.is_finite()
            && self.encoder.as_ref().is_none_or(|e| e.is_finite())
    }

    fn encoder_layers_mut(&mut self) -> Vec<&mut Linear> {
        let Some(e) = self.encoder.as_mut() else {
            return Vec::new();
        };
        let mut out = vec![&mut e.first, &mut e.second];
        if let Some(d) = e.decoder.as_mut() {
            out.push(&mut d.first);
            out.push(&mut d.second);
        }
        out
    }
}

fn encoder_grads(g: &Option<EncoderGrad>) -> Vec<&LinearGrad> {
    let Some(g) = g else {
        return Vec::new();
    };
    let mut out = vec![&g.first, &g.second];
    if let Some((a, b)) = &g.decoder {
        out.push(a);
        out.push(b);
    }
    out
}

/// Adam moments for every parameter group of a [`LeaningModel`].
pub struct Optimizer {
    pub adam: Adam,
    head: [Moments; 2],
    encoder: Vec<[Moments; 2]>,
    rows: SparseMoments,
}

impl Optimizer {
    pub fn new(lr: f64) -> Self {
        Optimizer {
            adam: Adam::new(lr),
            head: Default::default(),
            encoder: Vec::new(),
            rows: SparseMoments::new(),
        }
    }

    pub fn step(&mut self, model: &mut LeaningModel, grad: &ModelGrad) {
        self.adam.begin_step();
        let adam = &self.adam;
        let [hw, hb] = &mut self.head;
        adam.update(&mut model.head.layer.weight, &grad.head.weight, hw);
        adam.update(&mut model.head.layer.bias, &grad.head.bias, hb);
        let grads = encoder_grads(&grad.encoder);
        let layers = model.encoder_layers_mut();
        self.encoder.resize_with(layers.len(), Default::default);
        for ((layer, g), [mw, mb]) in layers.into_iter().zip(grads).zip(self.encoder.iter_mut()) {
            adam.update(&mut layer.weight, &g.weight, mw);
            adam.update(&mut layer.bias, &g.bias, mb);
        }
        let mut ids: Vec<&u64> = grad.backbone.keys().collect();
        ids.sort_unstable();
        for id in ids {
            let g = &grad.backbone[id];
            let state = self.rows.entry(*id).or_insert_with(|| Moments::new(g.len()));
            adam.update(model.backbone.row_mut(*id), g, state);
        }
    }
}

/// Serialized model plus the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub config: TrainConfig,
    pub beta: f64,
    pub embed_dim: usize,
    pub epochs_completed: usize,
    pub model: LeaningModel,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(&tmp, e))?;
        drop(w);
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::missing(format!("checkpoint {}", path.display()), "train")
            } else {
                Error::io(path, e)
            }
        })?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ckpt.model.head.layer.check_shapes()?;
        if let Some(e) = &ckpt.model.encoder {
            e.check_shapes()?;
        }
        if ckpt.model.head.input_dim() != 2 * ckpt.model.q() + ckpt.model.topic_dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * ckpt.model.q() + ckpt.model.topic_dim,
                got: ckpt.model.head.input_dim(),
            });
        }
        Ok(ckpt)
    }
}

/// Per-domain omega cache for evaluation, where backbone weights are fixed.
#[derive(Default)]
pub struct OmegaCache {
    map: HashMap<String, Vec<f64>>,
}

impl OmegaCache {
    pub fn get_or_compute(&mut self, model: &LeaningModel, f: &ArticleFeatures) -> &[f64] {
        self.map
            .entry(f.domain.clone())
            .or_insert_with(|| match &f.wiki_ids {
                Some(ids) => model.backbone.pool(ids),
                None => vec![0.0; model.q()],
            })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
