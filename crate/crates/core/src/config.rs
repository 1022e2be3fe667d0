//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skipgram::SkipGramParams;
use crate::split::SplitKind;
use crate::train::{config_hash, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub debates: Option<PathBuf>,
    pub wiki_cache: Option<PathBuf>,
    /// Offline fixture directory used instead of the live API when set.
    pub wiki_fixtures: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    /// Defaults to `<out>/embeddings.txt`.
    pub embeddings: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub kind: SplitKind,
    pub fraction: f64,
    pub seeds: Vec<u64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            kind: SplitKind::Media,
            fraction: 0.07,
            seeds: vec![1, 2, 3, 4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub betas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            betas: vec![0.0, 0.1, 0.5, 0.7, 1.0],
        }
    }
}

/// One matrix row: an id plus `model` keys to override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub id: String,
    #[serde(flatten)]
    pub overrides: toml::Table,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixSection {
    pub variants: Vec<Variant>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub workers: usize,
    pub ingest_parallelism: usize,
    /// Zero wall-clock columns so reruns give byte-identical tables.
    pub record_timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            workers: 2,
            ingest_parallelism: 4,
            record_timing: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: PathsSection,
    pub split: SplitSection,
    pub model: TrainConfig,
    pub embeddings: SkipGramParams,
    pub sweep: SweepSection,
    pub matrix: MatrixSection,
    pub run: RunSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.seeds.is_empty() {
            return Err(Error::Config("split.seeds must not be empty".into()));
        }
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            return Err(Error::Config("split.fraction must lie strictly between 0 and 1".into()));
        }
        if let Some(b) = self.sweep.betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::BetaOutOfRange(*b));
        }
        if self.run.workers == 0 || self.run.ingest_parallelism == 0 {
            return Err(Error::Config("run.workers and run.ingest_parallelism must be positive".into()));
        }
        self.model.validate()?;
        let mut ids = std::collections::HashSet::new();
        for v in &self.matrix.variants {
            if !ids.insert(&v.id) {
                return Err(Error::Config(format!("duplicate matrix variant id {:?}", v.id)));
            }
            self.variant_config(v)?.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form; `base_dir` is excluded.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn required(&self, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        p.as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config(format!("paths.{key} is not set")))
    }

    pub fn corpus_path(&self) -> Result<PathBuf> {
        self.required(&self.paths.corpus, "corpus")
    }

    pub fn debates_path(&self) -> Result<PathBuf> {
        self.required(&self.paths.debates, "debates")
    }

    pub fn wiki_cache_path(&self) -> Result<PathBuf> {
        self.required(&self.paths.wiki_cache, "wiki_cache")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(self.paths.out.as_deref().unwrap_or(Path::new("out")))
    }

    pub fn embeddings_path(&self) -> PathBuf {
        match &self.paths.embeddings {
            Some(p) => self.resolve(p),
            None => self.out_dir().join("embeddings.txt"),
        }
    }

    /// The model section with a variant's keys overlaid.
    pub fn variant_config(&self, v: &Variant) -> Result<TrainConfig> {
        let base = toml::Table::try_from(&self.model).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = base;
        for (k, val) in &v.overrides {
            merged.insert(k.clone(), val.clone());
        }
        merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("variant {:?}: {e}", v.id)))
    }
}
