//! `.stages.json`: which stages finished under which config hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct StageRecord {
    config_sha256: String,
    outputs: Vec<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    stages: BTreeMap<String, StageRecord>,
    #[serde(skip)]
    path: PathBuf,
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Self {
        let path = out_dir.join(".stages.json");
        let mut m: Manifest = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        m.path = path;
        m
    }

    /// True when `stage` completed with `hash` and its outputs still exist.
    pub fn is_done(&self, stage: &str, hash: &str) -> bool {
        self.stages
            .get(stage)
            .is_some_and(|r| r.config_sha256 == hash && r.outputs.iter().all(|p| p.exists()))
    }

    pub fn record(&mut self, stage: &str, hash: &str, outputs: Vec<PathBuf>) -> std::io::Result<()> {
        self.stages.insert(
            stage.to_owned(),
            StageRecord {
                config_sha256: hash.to_owned(),
                outputs,
            },
        );
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&self.path, text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn done_requires_same_hash_and_existing_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.csv");
        std::fs::write(&out, "x").unwrap();
        let mut m = Manifest::load(dir.path());
        assert!(!m.is_done("split", "h1"));
        m.record("split", "h1", vec![out.clone()]).unwrap();
        let m = Manifest::load(dir.path());
        assert!(m.is_done("split", "h1"));
        assert!(!m.is_done("split", "h2"));
        assert!(!m.is_done("train", "h1"));
        std::fs::remove_file(&out).unwrap();
        assert!(!m.is_done("split", "h1"));
    }
}
