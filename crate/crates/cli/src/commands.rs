use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use newslean::config::ExperimentConfig;
use newslean::corpus::{load_corpus, Corpus};
use newslean::debates::{load_debates, party_counts};
use newslean::model::Checkpoint;
use newslean::report::{self, bar_chart_svg, to_csv, write_text, ResultRow};
use newslean::skipgram::{train_skipgram, WordEmbeddingModel};
use newslean::split::{make_media_split, make_random_split, validate_split, SplitKind, SplitSpec, ValidationReport};
use newslean::synth::{self, SynthParams};
use newslean::train::{self, epoch_mean_losses, MatrixCell, Resources, TopicEncoder, TrainConfig};
use newslean::wiki::{self, parse_overrides, FixtureSource, HttpConfig, HttpSource, WikiCache, WikiSource};
use newslean::Error;

use crate::stages::Manifest;
use crate::{Cli, Command, SynthArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ResourceMissing { .. } => 3,
            Error::CacheMiss(_) => {
                return CliError {
                    code: 3,
                    message: format!("{e} (run `newslean ingest-wiki` first)"),
                }
            }
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: msg.into(),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: msg.into(),
    }
}

type CliResult<T> = Result<T, CliError>;

/// A pipeline stage: config and its hash in, written files out.
type Stage = fn(&ExperimentConfig, &str) -> CliResult<Vec<PathBuf>>;

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            base_dir: std::env::current_dir().map_err(|e| input(e.to_string()))?,
            ..ExperimentConfig::default()
        },
    };
    let cwd = std::env::current_dir().map_err(|e| input(e.to_string()))?;
    cfg.base_dir = cwd.join(&cfg.base_dir);
    // paths given on the command line are relative to the working directory
    let from_cli = |p: &PathBuf| Some(cwd.join(p));
    if let Some(out) = &cli.out {
        cfg.paths.out = from_cli(out);
    }
    match &cli.command {
        Command::IngestWiki(a) => {
            if let Some(p) = &a.corpus {
                cfg.paths.corpus = from_cli(p);
            }
            if let Some(p) = &a.cache_dir {
                cfg.paths.wiki_cache = from_cli(p);
            }
            if let Some(p) = &a.offline_fixtures {
                cfg.paths.wiki_fixtures = from_cli(p);
            }
            if let Some(p) = &a.overrides {
                cfg.paths.overrides = from_cli(p);
            }
        }
        Command::TrainEmbeddings(a) => {
            if let Some(p) = &a.debates {
                cfg.paths.debates = from_cli(p);
            }
            if let Some(p) = &a.model_out {
                cfg.paths.embeddings = from_cli(p);
            }
            if let Some(d) = a.dim {
                cfg.embeddings.embed_dim = d;
            }
            if let Some(s) = cli.seed {
                cfg.embeddings.seed = s;
            }
        }
        Command::Split(a) => {
            if let Some(p) = &a.corpus {
                cfg.paths.corpus = from_cli(p);
            }
            if let Some(k) = &a.kind {
                cfg.split.kind = if k == "media" { SplitKind::Media } else { SplitKind::Random };
            }
            if let Some(f) = a.fraction {
                cfg.split.fraction = f;
            }
        }
        Command::Sweep(a) => {
            if let Some(b) = &a.betas {
                cfg.sweep.betas = b.clone();
            }
        }
        _ => {}
    }
    if let (Some(s), false) = (cli.seed, matches!(cli.command, Command::TrainEmbeddings(_))) {
        cfg.model.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Command::Synth(a) = &cli.command {
        return synth_cmd(a);
    }
    let cfg = load_config(cli)?;
    let (name, f): (&str, Stage) = match &cli.command {
        Command::IngestWiki(_) => ("ingest-wiki", ingest_cmd),
        Command::TrainEmbeddings(_) => ("train-embeddings", embeddings_cmd),
        Command::Split(_) => ("split", split_cmd),
        Command::Train => ("train", train_cmd),
        Command::Evaluate => ("evaluate", evaluate_cmd),
        Command::Sweep(_) => ("sweep", sweep_cmd),
        Command::Matrix => ("matrix", matrix_cmd),
        Command::Synth(_) => unreachable!("handled above"),
    };
    let hash = cfg.hash();
    let out = cfg.out_dir();
    let mut manifest = Manifest::load(&out);
    if cli.resume && manifest.is_done(name, &hash) {
        println!("{name}: already complete for config {}, skipping", &hash[..12]);
        return Ok(());
    }
    let outputs = f(&cfg, &hash)?;
    manifest
        .record(name, &hash, outputs)
        .map_err(|e| input(format!("cannot write stage manifest in {}: {e}", out.display())))
}

fn load_corpus_cfg(cfg: &ExperimentConfig) -> CliResult<Corpus> {
    let path = cfg.corpus_path()?;
    let corpus = load_corpus(&path)?;
    log::info!("corpus {}: {} articles, {} domains", path.display(), corpus.len(), corpus.domain_count());
    Ok(corpus)
}

fn ingest_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let corpus = load_corpus_cfg(cfg)?;
    let overrides = match &cfg.paths.overrides {
        Some(p) => {
            let p = cfg.resolve(p);
            let text = std::fs::read_to_string(&p).map_err(|e| input(format!("{}: {e}", p.display())))?;
            parse_overrides(&text)?
        }
        None => BTreeMap::new(),
    };
    let cache_dir = cfg.wiki_cache_path()?;
    let mut cache = WikiCache::open(&cache_dir)?;
    let source: Box<dyn WikiSource> = match &cfg.paths.wiki_fixtures {
        Some(dir) => Box::new(FixtureSource::open(&cfg.resolve(dir))?),
        None => Box::new(HttpSource::new(HttpConfig::default())),
    };
    let report = wiki::ingest_wiki(corpus.domains(), &overrides, source.as_ref(), &mut cache, cfg.run.ingest_parallelism)?;
    println!(
        "ingest-wiki: {} domains, {} already cached, {} found, {} without a page, {} failed, {} source calls",
        report.domains,
        report.already_cached,
        report.found,
        report.not_found,
        report.failed.len(),
        source.calls()
    );
    #[derive(Serialize)]
    struct Out<'a> {
        config_sha256: &'a str,
        #[serde(flatten)]
        report: &'a wiki::IngestReport,
    }
    let path = cfg.out_dir().join("ingest_report.json");
    write_json(&path, &Out { config_sha256: hash, report: &report })?;
    if !report.failed.is_empty() {
        return Err(input(format!(
            "{} domains could not be fetched ({}); rerun to retry them",
            report.failed.len(),
            report.failed.join(", ")
        )));
    }
    Ok(vec![cache_dir, path])
}

fn embeddings_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let path = cfg.debates_path()?;
    let speeches = load_debates(&path)?;
    let counts = party_counts(&speeches);
    println!("debates: {} democrat, {} republican speeches", counts.democrat, counts.republican);
    let mut model = train_skipgram(&speeches, &cfg.embeddings)?;
    model.config_hash = Some(hash.to_owned());
    let out = cfg.embeddings_path();
    ensure_parent(&out)?;
    model.save(&out)?;
    println!("train-embeddings: {} tokens x {} dims -> {}", model.len(), model.dim(), out.display());
    Ok(vec![out])
}

fn split_path(cfg: &ExperimentConfig, kind: SplitKind, seed: u64) -> PathBuf {
    cfg.out_dir().join("splits").join(format!("{}-{seed}.json", kind.as_str()))
}

fn split_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let corpus = load_corpus_cfg(cfg)?;
    let mut outputs = Vec::new();
    let mut failed = Vec::new();
    for &seed in &cfg.split.seeds {
        let spec = match cfg.split.kind {
            SplitKind::Media => make_media_split(&corpus, cfg.split.fraction, seed)?,
            SplitKind::Random => make_random_split(&corpus, cfg.split.fraction, seed)?,
        };
        let report = validate_split(&spec, &corpus);
        let path = split_path(cfg, spec.kind, seed);
        #[derive(Serialize)]
        struct Out<'a> {
            config_sha256: &'a str,
            #[serde(flatten)]
            split: &'a SplitSpec,
            validation: &'a ValidationReport,
        }
        write_json(
            &path,
            &Out {
                config_sha256: hash,
                split: &spec,
                validation: &report,
            },
        )?;
        println!(
            "split {}: {} train / {} test, test domains {} -> {}",
            spec.id(),
            spec.train_ids.len(),
            spec.test_ids.len(),
            spec.test_domains.len(),
            report.summary()
        );
        if !report.ok {
            failed.push(spec.id());
        }
        outputs.push(path);
    }
    if !failed.is_empty() {
        return Err(invalid(format!("split validation failed for {}", failed.join(", "))));
    }
    Ok(outputs)
}

fn load_splits(cfg: &ExperimentConfig, corpus: &Corpus) -> CliResult<Vec<SplitSpec>> {
    cfg.split
        .seeds
        .iter()
        .map(|&seed| {
            let path = split_path(cfg, cfg.split.kind, seed);
            let text = std::fs::read_to_string(&path)
                .map_err(|_| Error::missing(format!("split file {}", path.display()), "newslean split"))?;
            let spec = SplitSpec::from_json(&text)?;
            let report = validate_split(&spec, corpus);
            if !report.ok {
                return Err(invalid(format!("{}: {}", path.display(), report.summary())));
            }
            Ok(spec)
        })
        .collect()
}

struct Loaded {
    wiki: Option<WikiCache>,
    embeddings: Option<WordEmbeddingModel>,
}

impl Loaded {
    fn resources(&self) -> Resources<'_> {
        Resources::new(self.wiki.as_ref(), self.embeddings.as_ref())
    }
}

fn load_resources<'a>(cfg: &ExperimentConfig, needs: impl IntoIterator<Item = &'a TrainConfig>) -> CliResult<Loaded> {
    let (mut need_wiki, mut need_emb) = (false, false);
    for c in needs {
        need_wiki |= c.use_wiki;
        need_emb |= c.topic_encoder != TopicEncoder::None;
    }
    let wiki = if need_wiki {
        let dir = cfg
            .wiki_cache_path()
            .map_err(|_| Error::missing("wiki cache (paths.wiki_cache is not set)", "newslean ingest-wiki"))?;
        let cache = WikiCache::open_existing(&dir)?;
        if cache.is_empty() {
            return Err(Error::missing(format!("wiki cache {} is empty", dir.display()), "newslean ingest-wiki").into());
        }
        Some(cache)
    } else {
        None
    };
    let embeddings = if need_emb {
        let path = cfg.embeddings_path();
        if !path.exists() {
            return Err(Error::missing(format!("embedding model {}", path.display()), "newslean train-embeddings").into());
        }
        Some(WordEmbeddingModel::load(&path)?)
    } else {
        None
    };
    Ok(Loaded { wiki, embeddings })
}

fn checkpoint_path(cfg: &ExperimentConfig, split: &SplitSpec) -> PathBuf {
    cfg.out_dir().join("checkpoints").join(format!("{}.json", split.id()))
}

fn train_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let corpus = load_corpus_cfg(cfg)?;
    let splits = load_splits(cfg, &corpus)?;
    let loaded = load_resources(cfg, [&cfg.model])?;
    let resources = loaded.resources();
    let mut outputs = Vec::new();
    for split in &splits {
        let start = Instant::now();
        let mut out = train::train(&cfg.model, &corpus, split, &resources)?;
        out.checkpoint.config_hash = hash.to_owned();
        let ckpt = checkpoint_path(cfg, split);
        ensure_parent(&ckpt)?;
        out.checkpoint.save(&ckpt)?;
        #[derive(Serialize)]
        struct Line<'a> {
            #[serde(flatten)]
            record: &'a train::HistoryRecord,
            config_sha256: &'a str,
        }
        let history: String = out
            .history
            .iter()
            .map(|record| serde_json::to_string(&Line { record, config_sha256: hash }).expect("history serializes") + "\n")
            .collect();
        let hist = cfg.out_dir().join("history").join(format!("{}.jsonl", split.id()));
        write_text(&hist, &history)?;
        let means: Vec<String> = epoch_mean_losses(&out.history).iter().map(|l| format!("{l:.4}")).collect();
        println!(
            "train {}: epoch mean loss [{}] in {:.1}s -> {}",
            split.id(),
            means.join(", "),
            start.elapsed().as_secs_f64(),
            ckpt.display()
        );
        outputs.push(ckpt);
        outputs.push(hist);
    }
    Ok(outputs)
}

fn evaluate_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let corpus = load_corpus_cfg(cfg)?;
    let splits = load_splits(cfg, &corpus)?;
    let mut rows = Vec::new();
    for split in &splits {
        let start = Instant::now();
        let ckpt = Checkpoint::load(&checkpoint_path(cfg, split))?;
        let loaded = load_resources(cfg, [&ckpt.config])?;
        let report = train::evaluate(&ckpt, &corpus, &split.test_ids, &loaded.resources())?;
        let secs = cfg.run.record_timing.then(|| start.elapsed().as_secs_f64());
        let row = ResultRow::new("model", &ckpt.config, &split.id(), &report, secs);
        print_row(&row);
        rows.push(row);
    }
    let csv = cfg.out_dir().join("results.csv");
    write_text(&csv, &to_csv(&rows, hash)?)?;
    let bars: Vec<(String, f64)> = rows.iter().map(|r| (r.split_id.clone(), r.accuracy)).collect();
    let svg = cfg.out_dir().join("accuracy_by_split.svg");
    write_text(&svg, &bar_chart_svg("Accuracy per split", &bars, hash))?;
    Ok(vec![csv, svg])
}

fn sweep_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let corpus = load_corpus_cfg(cfg)?;
    let splits = load_splits(cfg, &corpus)?;
    let split = &splits[0];
    let loaded = load_resources(cfg, [&cfg.model])?;
    let sweep = train::sweep_beta(&cfg.model, &cfg.sweep.betas, &corpus, split, &loaded.resources())?;
    let rows = report::rows_from_sweep("sweep", &cfg.model, &split.id(), &sweep, cfg.run.record_timing);
    rows.iter().for_each(print_row);
    let csv = cfg.out_dir().join("sweep_beta.csv");
    write_text(&csv, &to_csv(&rows, hash)?)?;
    let bars: Vec<(String, f64)> = sweep.iter().map(|s| (format!("beta={}", s.beta), s.report.accuracy)).collect();
    let svg = cfg.out_dir().join("sweep_beta.svg");
    write_text(&svg, &bar_chart_svg(&format!("Accuracy by beta ({})", split.id()), &bars, hash))?;
    Ok(vec![csv, svg])
}

fn matrix_cmd(cfg: &ExperimentConfig, hash: &str) -> CliResult<Vec<PathBuf>> {
    let corpus = load_corpus_cfg(cfg)?;
    let splits = load_splits(cfg, &corpus)?;
    let variants: Vec<(String, TrainConfig)> = if cfg.matrix.variants.is_empty() {
        vec![("model".to_owned(), cfg.model.clone())]
    } else {
        cfg.matrix
            .variants
            .iter()
            .map(|v| Ok((v.id.clone(), cfg.variant_config(v)?)))
            .collect::<Result<_, Error>>()?
    };
    let loaded = load_resources(cfg, variants.iter().map(|(_, c)| c))?;
    let cells: Vec<MatrixCell> = variants
        .iter()
        .flat_map(|(id, c)| {
            splits.iter().map(|s| MatrixCell {
                experiment_id: id.clone(),
                config: c.clone(),
                split: s.clone(),
            })
        })
        .collect();
    let outcomes = train::run_matrix(&cells, &corpus, &loaded.resources(), cfg.run.workers);
    let rows = report::rows_from_outcomes(&outcomes, cfg.run.record_timing);
    rows.iter().for_each(print_row);
    let ranking = train::rank_experiments(&outcomes);
    for r in &ranking {
        println!(
            "rank {}: {} mean accuracy {:.4} macro-F1 {:.4} ({} ok, {} failed)",
            r.rank, r.experiment_id, r.mean_accuracy, r.mean_macro_f1, r.splits_ok, r.splits_failed
        );
    }
    let dir = cfg.out_dir();
    let files = [
        (dir.join("matrix.csv"), to_csv(&rows, hash)?),
        (dir.join("matrix_errors.csv"), report::errors_csv(&outcomes, hash)?),
        (dir.join("matrix_ranking.csv"), report::ranking_csv(&ranking, hash)?),
        (
            dir.join("matrix_accuracy.svg"),
            bar_chart_svg(
                "Mean accuracy per experiment",
                &ranking.iter().map(|r| (r.experiment_id.clone(), r.mean_accuracy)).collect::<Vec<_>>(),
                hash,
            ),
        ),
    ];
    for (p, text) in &files {
        write_text(p, text)?;
    }
    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    if failed == outcomes.len() {
        return Err(input("every matrix cell failed; see matrix_errors.csv"));
    }
    if failed > 0 {
        log::warn!("{failed} of {} matrix cells failed; see matrix_errors.csv", outcomes.len());
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

fn synth_cmd(a: &SynthArgs) -> CliResult<()> {
    let params = SynthParams {
        articles: a.articles,
        domains_per_leaning: a.domains_per_leaning,
        ..SynthParams::default()
    };
    let data = synth::generate(&params)?;
    synth::write_dataset(&data, &a.dir)?;
    let width = a.backbone_width.map(|w| format!("backbone_width = {w}\n")).unwrap_or_default();
    let config = format!(
        r#"[paths]
corpus = "corpus.jsonl"
debates = "debates.jsonl"
wiki_cache = "wiki_cache"
wiki_fixtures = "wiki_fixtures"
out = "out"

[split]
kind = "media"
fraction = 0.2
seeds = [1, 2]

[model]
learning_rate = 0.001
{width}
[sweep]
betas = [0.0, 0.1, 0.5, 0.7, 1.0]

[[matrix.variants]]
id = "news"
topic_encoder = "none"
use_wiki = false

[[matrix.variants]]
id = "news+wiki"
topic_encoder = "none"
use_wiki = true

[[matrix.variants]]
id = "news+wiki+topic-e"
topic_encoder = "encoder"
use_wiki = true

[[matrix.variants]]
id = "news+wiki+topic-ae"
topic_encoder = "autoencoder"
use_wiki = true

[run]
workers = 2
record_timing = false
"#
    );
    write_text(&a.dir.join("experiment.toml"), &config)?;
    println!(
        "synth: {} articles over {} domains, {} speeches -> {}",
        data.corpus.len(),
        data.corpus.domain_count(),
        data.debates.len(),
        a.dir.display()
    );
    Ok(())
}

fn print_row(r: &ResultRow) {
    println!(
        "{:<24} {:<12} acc {:.4}  P {:.4}  R {:.4}  F1 {:.4}  MAE {:.4}  n={}",
        r.experiment_id, r.split_id, r.accuracy, r.precision, r.recall, r.macro_f1, r.mae, r.n_test
    );
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| input(e.to_string()))?;
    write_text(path, &(text + "\n"))?;
    Ok(())
}
