//! Skip-gram word embeddings with negative sampling.
//!
//! Single-threaded and driven by one seeded ChaCha stream, so a fixed seed
//! reproduces bit-identical vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::debates::DebateSpeech;
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramParams {
    pub embed_dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub seed: u64,
    /// Initial learning rate, decayed linearly to `alpha * 1e-4`.
    pub alpha: f64,
    /// Frequent-word subsampling threshold; 0 disables.
    pub sample: f64,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        SkipGramParams {
            embed_dim: 300,
            window: 5,
            negative: 5,
            epochs: 5,
            min_count: 2,
            seed: 1,
            alpha: 0.025,
            sample: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddingModel {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    dim: usize,
    params: SkipGramParams,
    /// Hash of the configuration that produced the model, kept in the header.
    pub config_hash: Option<String>,
}

impl WordEmbeddingModel {
    /// Builds a model from explicit vectors (all of length `dim`).
    pub fn from_vectors(
        entries: Vec<(String, Vec<f64>)>,
        dim: usize,
        params: SkipGramParams,
    ) -> Result<Self> {
        let mut vocab = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for (token, v) in entries {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if index.insert(token.clone(), vocab.len()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {token:?}")));
            }
            vocab.push(token);
            vectors.extend(v);
        }
        Ok(WordEmbeddingModel {
            vocab,
            index,
            vectors,
            dim,
            params,
            config_hash: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn params(&self) -> &SkipGramParams {
        &self.params
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (va, vb) = (self.vector(a)?, self.vector(b)?);
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            Some(0.0)
        } else {
            Some(dot / (na * nb))
        }
    }

    /// Text form: a header line
    /// `<embed_dim> <vocab_size> window=.. negative=.. epochs=.. min_count=.. seed=.. alpha=.. sample=..`
    /// followed by one `token v1 .. v_dim` line per token. Floats use the
    /// shortest representation that round-trips exactly.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "{} {} window={} negative={} epochs={} min_count={} seed={} alpha={} sample={}\n",
            self.dim,
            self.vocab.len(),
            p.window,
            p.negative,
            p.epochs,
            p.min_count,
            p.seed,
            p.alpha,
            p.sample
        );
        if let Some(h) = &self.config_hash {
            out.insert_str(out.len() - 1, &format!(" config_sha256={h}"));
        }
        for (i, tok) in self.vocab.iter().enumerate() {
            out.push_str(tok);
            for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::ModelFormat { line, reason };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
        let mut fields = header.split_whitespace();
        let dim: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(1, "missing embed_dim".into()))?;
        let size: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(1, "missing vocab size".into()))?;
        if dim == 0 {
            return Err(bad(1, "embed_dim must be positive".into()));
        }
        let mut params = SkipGramParams {
            embed_dim: dim,
            ..SkipGramParams::default()
        };
        let mut config_hash = None;
        for kv in fields {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(1, format!("bad header field {kv:?}")))?;
            let parse_err = |_| bad(1, format!("bad value for {k}"));
            match k {
                "window" => params.window = v.parse().map_err(parse_err)?,
                "negative" => params.negative = v.parse().map_err(parse_err)?,
                "epochs" => params.epochs = v.parse().map_err(parse_err)?,
                "min_count" => params.min_count = v.parse().map_err(parse_err)?,
                "seed" => params.seed = v.parse().map_err(parse_err)?,
                "alpha" => params.alpha = v.parse().map_err(|_| bad(1, format!("bad value for {k}")))?,
                "sample" => params.sample = v.parse().map_err(|_| bad(1, format!("bad value for {k}")))?,
                "config_sha256" => config_hash = Some(v.to_owned()),
                _ => return Err(bad(1, format!("unknown header field {k:?}"))),
            }
        }

        let mut entries = Vec::with_capacity(size.min(1 << 20));
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-blank line has a field").to_owned();
            let v: Vec<f64> = parts
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(line_no, e.to_string()))?;
            if v.len() != dim {
                return Err(bad(line_no, format!("expected {dim} components, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(bad(line_no, "non-finite component".into()));
            }
            entries.push((token, v));
        }
        if entries.len() != size {
            return Err(bad(1, format!("header says {size} tokens, found {}", entries.len())));
        }
        let mut model = WordEmbeddingModel::from_vectors(entries, dim, params).map_err(|e| bad(0, e.to_string()))?;
        model.config_hash = config_hash;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram vectors on all speeches, ignoring party.
pub fn train_skipgram(speeches: &[DebateSpeech], params: &SkipGramParams) -> Result<WordEmbeddingModel> {
    let sentences: Vec<Vec<String>> = speeches.iter().map(|s| tokenize(&s.text)).collect();
    train_on_sentences(&sentences, params)
}

/// Core trainer over pre-tokenized sentences.
pub fn train_on_sentences(sentences: &[Vec<String>], params: &SkipGramParams) -> Result<WordEmbeddingModel> {
    if sentences.iter().all(Vec::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    if params.embed_dim == 0 || params.window == 0 {
        return Err(Error::InvalidArgument("embed_dim and window must be positive".into()));
    }
    let dim = params.embed_dim;

    let mut counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= params.min_count.max(1))
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
    let n = vocab.len();

    let corpus: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    let train_words: u64 = vocab.iter().map(|(_, c)| c).sum();

    // noise distribution: unigram^0.75, sampled by inverse CDF
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for (_, c) in &vocab {
        acc += (*c as f64).powf(0.75);
        cdf.push(acc);
    }
    let keep_prob: Vec<f64> = vocab
        .iter()
        .map(|(_, c)| {
            if params.sample <= 0.0 {
                1.0
            } else {
                let threshold = params.sample * train_words as f64;
                let f = *c as f64;
                (((f / threshold).sqrt() + 1.0) * threshold / f).min(1.0)
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut input: Vec<f64> = (0..n * dim).map(|_| (rng.random::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0f64; n * dim];
    let mut grad = vec![0.0f64; dim];

    let total = (params.epochs as u64 * train_words).max(1) as f64;
    let mut processed = 0u64;
    let min_alpha = params.alpha * 1e-4;

    for _ in 0..params.epochs {
        for sentence in &corpus {
            let kept: Vec<usize> = sentence
                .iter()
                .copied()
                .filter(|&w| keep_prob[w] >= 1.0 || rng.random::<f64>() < keep_prob[w])
                .collect();
            processed += sentence.len() as u64;
            let alpha = (params.alpha * (1.0 - processed as f64 / total)).max(min_alpha);
            for (pos, &center) in kept.iter().enumerate() {
                let reduced = rng.random_range(0..params.window);
                let span = params.window - reduced;
                let lo = pos.saturating_sub(span);
                let hi = (pos + span).min(kept.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = kept[ctx_pos];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let l1 = center * dim;
                    for d in 0..=params.negative {
                        let (target, label) = if d == 0 {
                            (context, 1.0)
                        } else {
                            let u = rng.random::<f64>() * acc;
                            let t = cdf.partition_point(|&c| c <= u).min(n - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let l2 = target * dim;
                        let dot: f64 = (0..dim).map(|k| input[l1 + k] * output[l2 + k]).sum();
                        let g = (label - sigmoid(dot)) * alpha;
                        for k in 0..dim {
                            grad[k] += g * output[l2 + k];
                            output[l2 + k] += g * input[l1 + k];
                        }
                    }
                    for k in 0..dim {
                        input[l1 + k] += grad[k];
                    }
                }
            }
        }
    }

    let entries = vocab
        .iter()
        .enumerate()
        .map(|(i, (t, _))| ((*t).to_owned(), input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    WordEmbeddingModel::from_vectors(entries, dim, params.clone())
}
