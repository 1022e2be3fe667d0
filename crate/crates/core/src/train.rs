//! Joint training, evaluation, beta sweeps and experiment matrices.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{load_backbone, Backbone, DEFAULT_MAX_TOKENS};
use crate::corpus::{Article, Corpus};
use crate::error::{Error, Result};
use crate::fusion::HeadMode;
use crate::metrics::{confusion_from_pairs, MetricsReport};
use crate::model::{ArticleFeatures, Checkpoint, LeaningModel, OmegaCache, Optimizer};
use crate::skipgram::WordEmbeddingModel;
use crate::split::{validate_split, SplitSpec};
use crate::text::english_stopwords;
use crate::topics::{extract_topics, topic_mean_vector};
use crate::wiki::{wiki_text_for_article, WikiCache};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicEncoder {
    None,
    #[default]
    Encoder,
    Autoencoder,
}

impl TopicEncoder {
    pub fn as_str(self) -> &'static str {
        match self {
            TopicEncoder::None => "none",
            TopicEncoder::Encoder => "encoder",
            TopicEncoder::Autoencoder => "autoencoder",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingWiki {
    /// Omega is the backbone's encoding of the empty string.
    #[default]
    EmptyText,
    ZeroVector,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub backbone: String,
    /// Overrides the backbone's hidden width (small stubs for tests).
    pub backbone_width: Option<usize>,
    pub max_tokens: usize,
    pub topic_encoder: TopicEncoder,
    pub use_wiki: bool,
    pub use_article: bool,
    pub beta: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub recon_weight: f64,
    pub topic_dim: usize,
    pub encoder_hidden_dim: usize,
    pub head: HeadMode,
    pub missing_wiki: MissingWiki,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            backbone: "bert-base".into(),
            backbone_width: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            topic_encoder: TopicEncoder::Encoder,
            use_wiki: true,
            use_article: true,
            beta: 0.5,
            batch_size: 2,
            learning_rate: 1e-6,
            epochs: 3,
            optimizer: OptimizerKind::Adam,
            seed: 1,
            recon_weight: 1.0,
            topic_dim: 200,
            encoder_hidden_dim: 256,
            head: HeadMode::PaperRelu,
            missing_wiki: MissingWiki::EmptyText,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::BetaOutOfRange(self.beta));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.topic_dim == 0 || self.encoder_hidden_dim < self.topic_dim {
            return Err(Error::Config("encoder_hidden_dim must be >= topic_dim > 0".into()));
        }
        if !(self.recon_weight >= 0.0 && self.recon_weight.is_finite()) {
            return Err(Error::Config("recon_weight must be finite and >= 0".into()));
        }
        self.load_backbone().map(|_| ())
    }

    pub fn load_backbone(&self) -> Result<Backbone> {
        match self.backbone_width {
            Some(w) => Backbone::with_width(&self.backbone, w, self.max_tokens),
            None => {
                let b = load_backbone(&self.backbone)?;
                Backbone::with_width(&self.backbone, b.width, self.max_tokens)
            }
        }
    }
}

/// External inputs shared by training and evaluation.
pub struct Resources<'a> {
    pub wiki: Option<&'a WikiCache>,
    pub embeddings: Option<&'a WordEmbeddingModel>,
    pub stopwords: HashSet<String>,
}

impl<'a> Resources<'a> {
    pub fn new(wiki: Option<&'a WikiCache>, embeddings: Option<&'a WordEmbeddingModel>) -> Self {
        Resources {
            wiki,
            embeddings,
            stopwords: english_stopwords(),
        }
    }

    /// Fails with the command that would produce whatever `config` needs.
    pub fn check(&self, config: &TrainConfig) -> Result<()> {
        if config.use_wiki && self.wiki.is_none_or(|w| w.is_empty()) {
            return Err(Error::missing("wiki cache", "ingest-wiki"));
        }
        if config.topic_encoder != TopicEncoder::None && self.embeddings.is_none() {
            return Err(Error::missing("embedding model", "train-embeddings"));
        }
        Ok(())
    }

    fn embed_dim(&self, config: &TrainConfig) -> usize {
        match (config.topic_encoder, self.embeddings) {
            (TopicEncoder::None, _) | (_, None) => 0,
            (_, Some(m)) => m.dim(),
        }
    }
}

pub fn article_features(
    article: &Article,
    config: &TrainConfig,
    resources: &Resources,
    backbone: &Backbone,
) -> Result<ArticleFeatures> {
    let article_ids = config.use_article.then(|| backbone.token_ids(&article.text()));
    let wiki_ids = if config.use_wiki {
        let cache = resources.wiki.ok_or_else(|| Error::missing("wiki cache", "ingest-wiki"))?;
        let text = wiki_text_for_article(article, cache)?;
        if text.is_empty() && config.missing_wiki == MissingWiki::ZeroVector {
            None
        } else {
            Some(backbone.token_ids(&text))
        }
    } else {
        None
    };
    let topic_mean = match config.topic_encoder {
        TopicEncoder::None => None,
        _ => {
            let emb = resources
                .embeddings
                .ok_or_else(|| Error::missing("embedding model", "train-embeddings"))?;
            let topics = extract_topics(article, emb, &resources.stopwords);
            Some(topic_mean_vector(&topics, emb))
        }
    };
    Ok(ArticleFeatures {
        id: article.id.clone(),
        domain: article.domain.clone(),
        label: article.label,
        article_ids,
        wiki_ids,
        topic_mean,
    })
}

fn features_for_ids(
    ids: &[String],
    corpus: &Corpus,
    config: &TrainConfig,
    resources: &Resources,
    backbone: &Backbone,
) -> Result<Vec<ArticleFeatures>> {
    ids.iter()
        .map(|id| {
            let a = corpus
                .get(id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown article id {id:?}")))?;
            article_features(a, config, resources, backbone)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub recon_loss: f64,
}

pub fn history_to_jsonl(history: &[HistoryRecord]) -> String {
    history
        .iter()
        .map(|r| serde_json::to_string(r).expect("history serializes") + "\n")
        .collect()
}

/// Mean of the per-step losses of each epoch, in epoch order.
pub fn epoch_mean_losses(history: &[HistoryRecord]) -> Vec<f64> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for r in history {
        if out.len() < r.epoch {
            out.resize(r.epoch, (0.0, 0));
        }
        let slot = &mut out[r.epoch - 1];
        slot.0 += r.loss;
        slot.1 += 1;
    }
    out.into_iter().map(|(s, n)| s / n.max(1) as f64).collect()
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<HistoryRecord>,
}

/// SHA-256 of the canonical JSON form of a serializable value.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

pub fn train(config: &TrainConfig, corpus: &Corpus, split: &SplitSpec, resources: &Resources) -> Result<TrainOutcome> {
    config.validate()?;
    let report = validate_split(split, corpus);
    if !report.ok {
        return Err(Error::InvalidArgument(format!("split {} is invalid: {}", split.id(), report.summary())));
    }
    resources.check(config)?;
    let backbone = config.load_backbone()?;
    let embed_dim = resources.embed_dim(config);
    let features = features_for_ids(&split.train_ids, corpus, config, resources, &backbone)?;
    if features.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
    order_rng.set_stream(1);
    let mut model = LeaningModel::init(config, backbone, embed_dim, &mut init_rng)?;
    let mut opt = Optimizer::new(config.learning_rate);
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..features.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let step = step + 1;
            let scale = 1.0 / batch.len() as f64;
            let mut grad = model.zero_grad();
            let (mut ce, mut recon) = (0.0, 0.0);
            for &i in batch {
                let (c, r) = model.accumulate(&features[i], scale, &mut grad)?;
                ce += c * scale;
                recon += r * scale;
            }
            if !ce.is_finite() || !recon.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    detail: format!("cross-entropy {ce}, reconstruction {recon}"),
                });
            }
            opt.step(&mut model, &grad);
            history.push(HistoryRecord {
                epoch,
                step,
                loss: ce,
                recon_loss: recon,
            });
        }
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                step: history.last().map_or(0, |r| r.step),
                detail: "parameters became non-finite".into(),
            });
        }
        log::debug!("epoch {epoch}: mean loss {:.6}", epoch_mean_losses(&history)[epoch - 1]);
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config_hash: config_hash(config),
            config: config.clone(),
            beta: config.beta,
            embed_dim,
            epochs_completed: config.epochs,
            model,
        },
        history,
    })
}

/// Predicts every listed article in order. Never shuffles; omega is computed
/// once per domain since the backbone is frozen here.
pub fn predict_ids(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    ids: &[String],
    resources: &Resources,
) -> Result<Vec<(ArticleFeatures, crate::corpus::Leaning)>> {
    resources.check(&checkpoint.config)?;
    let model = &checkpoint.model;
    let features = features_for_ids(ids, corpus, &checkpoint.config, resources, &model.backbone)?;
    let mut cache = OmegaCache::default();
    features
        .into_iter()
        .map(|f| {
            let omega = cache.get_or_compute(model, &f).to_vec();
            let pred = model.predict(&f, Some(&omega))?;
            Ok((f, pred))
        })
        .collect()
}

pub fn evaluate(checkpoint: &Checkpoint, corpus: &Corpus, test_ids: &[String], resources: &Resources) -> Result<MetricsReport> {
    if test_ids.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let preds = predict_ids(checkpoint, corpus, test_ids, resources)?;
    MetricsReport::from_confusion(confusion_from_pairs(preds.iter().map(|(f, p)| (f.label, *p))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub report: MetricsReport,
    pub wall_seconds: f64,
}

/// Drops repeated betas, keeping first occurrences in order.
pub fn dedup_betas(betas: &[f64]) -> Vec<f64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &b in betas {
        if seen.insert(b.to_bits()) {
            out.push(b);
        } else {
            log::warn!("duplicate beta {b} in sweep ignored");
        }
    }
    out
}

/// One independent train + evaluate per beta, all sharing `config.seed`.
pub fn sweep_beta(
    config: &TrainConfig,
    betas: &[f64],
    corpus: &Corpus,
    split: &SplitSpec,
    resources: &Resources,
) -> Result<Vec<SweepRow>> {
    if let Some(&b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::BetaOutOfRange(b));
    }
    dedup_betas(betas)
        .into_iter()
        .map(|beta| {
            let cfg = TrainConfig { beta, ..config.clone() };
            let start = Instant::now();
            let out = train(&cfg, corpus, split, resources)?;
            let report = evaluate(&out.checkpoint, corpus, &split.test_ids, resources)?;
            Ok(SweepRow {
                beta,
                report,
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MatrixCell {
    pub experiment_id: String,
    pub config: TrainConfig,
    pub split: SplitSpec,
}

#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub experiment_id: String,
    pub config: TrainConfig,
    pub split_id: String,
    pub result: std::result::Result<MetricsReport, String>,
    pub wall_seconds: f64,
}

fn run_cell(cell: &MatrixCell, corpus: &Corpus, resources: &Resources) -> Result<MetricsReport> {
    let out = train(&cell.config, corpus, &cell.split, resources)?;
    evaluate(&out.checkpoint, corpus, &cell.split.test_ids, resources)
}

/// Runs every cell on up to `workers` threads. A failing cell is recorded
/// and does not stop the others. Outcomes are in cell order.
pub fn run_matrix(cells: &[MatrixCell], corpus: &Corpus, resources: &Resources, workers: usize) -> Vec<CellOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; cells.len()]);
    let workers = workers.clamp(1, cells.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else {
                    break;
                };
                let start = Instant::now();
                let result = run_cell(cell, corpus, resources).map_err(|e| {
                    log::error!("cell {} / {} failed: {e}", cell.experiment_id, cell.split.id());
                    e.to_string()
                });
                let outcome = CellOutcome {
                    experiment_id: cell.experiment_id.clone(),
                    config: cell.config.clone(),
                    split_id: cell.split.id(),
                    result,
                    wall_seconds: start.elapsed().as_secs_f64(),
                };
                slots.lock().expect("matrix slots")[i] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .expect("matrix slots")
        .into_iter()
        .map(|o| o.expect("every cell ran"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEntry {
    pub rank: usize,
    pub experiment_id: String,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
    pub splits_ok: usize,
    pub splits_failed: usize,
}

/// Experiments ordered by mean accuracy over their successful splits.
pub fn rank_experiments(outcomes: &[CellOutcome]) -> Vec<RankEntry> {
    let mut ids: Vec<&str> = Vec::new();
    for o in outcomes {
        if !ids.contains(&o.experiment_id.as_str()) {
            ids.push(&o.experiment_id);
        }
    }
    let mut entries: Vec<RankEntry> = ids
        .into_iter()
        .map(|id| {
            let mine: Vec<&CellOutcome> = outcomes.iter().filter(|o| o.experiment_id == id).collect();
            let ok: Vec<&MetricsReport> = mine.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            let n = ok.len().max(1) as f64;
            RankEntry {
                rank: 0,
                experiment_id: id.to_owned(),
                mean_accuracy: ok.iter().map(|r| r.accuracy).sum::<f64>() / n,
                mean_macro_f1: ok.iter().map(|r| r.macro_f1).sum::<f64>() / n,
                splits_ok: ok.len(),
                splits_failed: mine.len() - ok.len(),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.mean_accuracy
            .total_cmp(&a.mean_accuracy)
            .then_with(|| a.experiment_id.cmp(&b.experiment_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}
