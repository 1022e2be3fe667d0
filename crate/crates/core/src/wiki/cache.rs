use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unreserved characters stay literal: `cnn.com` -> `cnn.com.json`.
const FILENAME_ESCAPE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// Wikipedia page text for one publisher domain.
///
/// `found == false` records a resolved absence (no page, or a deleted one);
/// the body is then empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiDoc {
    pub domain: String,
    pub title: String,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
    pub found: bool,
}

impl WikiDoc {
    pub fn not_found(domain: &str, title: &str) -> Self {
        WikiDoc {
            domain: domain.to_owned(),
            title: title.to_owned(),
            body: String::new(),
            fetched_at: Utc::now(),
            found: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WikiDoc = serde_json::from_str(text)?;
        doc.check()?;
        Ok(doc)
    }

    fn check(&self) -> Result<()> {
        if self.found == self.body.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "wiki doc for {:?}: found={} but body length {}",
                self.domain,
                self.found,
                self.body.len()
            )));
        }
        Ok(())
    }
}

pub fn encode_domain_filename(domain: &str) -> String {
    format!("{}.json", utf8_percent_encode(domain, FILENAME_ESCAPE))
}

pub fn decode_domain_filename(name: &str) -> Option<String> {
    let stem = name.strip_suffix(".json")?;
    percent_decode_str(stem).decode_utf8().ok().map(|s| s.into_owned())
}

/// Directory-backed map domain -> [`WikiDoc`], one JSON file per domain.
///
/// Entries are write-once: inserting over an existing domain returns the
/// stored document unchanged.
#[derive(Debug)]
pub struct WikiCache {
    dir: PathBuf,
    docs: BTreeMap<String, WikiDoc>,
}

impl WikiCache {
    /// Opens (creating if needed) a cache directory and loads every entry.
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Self::load(dir)
    }

    /// Opens an existing cache directory without creating it.
    pub fn open_existing(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::missing(
                format!("wiki cache directory {}", dir.display()),
                "ingest-wiki",
            ));
        }
        Self::load(dir)
    }

    fn load(dir: &Path) -> Result<Self> {
        let mut docs = BTreeMap::new();
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.starts_with('.') {
                continue;
            }
            let Some(domain) = decode_domain_filename(name) else {
                continue;
            };
            let path = entry.path();
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let doc = WikiDoc::from_json(&text)?;
            if doc.domain != domain {
                return Err(Error::InvalidArgument(format!(
                    "{} holds an entry for {:?}",
                    path.display(),
                    doc.domain
                )));
            }
            docs.insert(domain, doc);
        }
        Ok(WikiCache {
            dir: dir.to_path_buf(),
            docs,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, domain: &str) -> Option<&WikiDoc> {
        self.docs.get(domain)
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.docs.contains_key(domain)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WikiDoc> {
        self.docs.values()
    }

    /// Any cached document fetched under `title` with a found page.
    pub fn find_title(&self, title: &str) -> Option<&WikiDoc> {
        self.docs.values().find(|d| d.found && d.title == title)
    }

    /// Writes `doc` atomically (temp file + rename) unless the domain already
    /// has an entry. Returns the stored entry.
    pub fn insert(&mut self, doc: WikiDoc) -> Result<WikiDoc> {
        doc.check()?;
        if let Some(existing) = self.docs.get(&doc.domain) {
            return Ok(existing.clone());
        }
        let name = encode_domain_filename(&doc.domain);
        let final_path = self.dir.join(&name);
        let tmp_path = self.dir.join(format!(".{name}.tmp"));
        let json = serde_json::to_string_pretty(&doc)?;
        {
            let mut f = fs::File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
            f.write_all(json.as_bytes()).map_err(|e| Error::io(&tmp_path, e))?;
            f.sync_all().map_err(|e| Error::io(&tmp_path, e))?;
        }
        fs::rename(&tmp_path, &final_path).map_err(|e| Error::io(&final_path, e))?;
        self.docs.insert(doc.domain.clone(), doc.clone());
        Ok(doc)
    }
}
