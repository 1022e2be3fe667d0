//! Labeled news articles.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Political leaning with fixed ordinal codes. MAE is computed over these codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leaning {
    Left = 0,
    Center = 1,
    Right = 2,
}

impl Leaning {
    pub const ALL: [Leaning; 3] = [Leaning::Left, Leaning::Center, Leaning::Right];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Leaning> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Leaning::Left => "left",
            Leaning::Center => "center",
            Leaning::Right => "right",
        }
    }
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Leaning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Leaning::Left),
            "center" => Ok(Leaning::Center),
            "right" => Ok(Leaning::Right),
            _ => Err(s.to_owned()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub domain: String,
    pub title: String,
    pub body: String,
    pub label: Leaning,
}

impl Article {
    /// Title and body joined the way every text consumer sees them.
    pub fn text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{}\n{}", self.title, self.body)
        }
    }
}

/// Publisher keys are compared as exact strings after trimming and lowercasing.
pub fn normalize_domain(domain: &str) -> String {
    domain.trim().to_lowercase()
}

/// A validated, immutable article collection.
#[derive(Clone, Debug)]
pub struct Corpus {
    articles: Vec<Article>,
    domains: BTreeSet<String>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Validates invariants: unique ids, normalized non-empty domains,
    /// non-blank bodies.
    pub fn new(articles: Vec<Article>) -> Result<Self> {
        let mut index = HashMap::with_capacity(articles.len());
        let mut domains = BTreeSet::new();
        for (i, a) in articles.iter().enumerate() {
            if a.domain.is_empty() || a.domain != normalize_domain(&a.domain) {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: format!("domain {:?} is empty or not normalized", a.domain),
                });
            }
            if a.body.trim().is_empty() {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: "body is blank".into(),
                });
            }
            if index.insert(a.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(a.id.clone()));
            }
            domains.insert(a.domain.clone());
        }
        Ok(Corpus {
            articles,
            domains,
            index,
        })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn domains(&self) -> &BTreeSet<String> {
        &self.domains
    }

    /// Number of articles (l).
    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// Number of distinct publisher domains (m).
    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.index.get(id).map(|&i| &self.articles[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for a in &self.articles {
            counts[a.label.code()] += 1;
        }
        counts
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for a in &self.articles {
            let record = RawArticle {
                id: Some(a.id.clone()),
                domain: Some(a.domain.clone()),
                title: Some(a.title.clone()),
                body: Some(a.body.clone()),
                label: Some(a.label.as_str().to_owned()),
            };
            out.push_str(&serde_json::to_string(&record).expect("article serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct RawArticle {
    id: Option<String>,
    domain: Option<String>,
    title: Option<String>,
    body: Option<String>,
    label: Option<String>,
}

/// Parses JSON-lines text into a corpus. Blank lines are skipped; line numbers
/// in errors are 1-based physical lines.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut articles = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        let field = |v: Option<String>, name: &str| {
            v.ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: format!("missing field `{name}`"),
            })
        };
        let id = field(raw.id, "id")?;
        let domain = normalize_domain(&field(raw.domain, "domain")?);
        let title = field(raw.title, "title")?;
        let body = field(raw.body, "body")?;
        let label_str = field(raw.label, "label")?;
        let label = label_str.parse::<Leaning>().map_err(|label| Error::UnknownLabel {
            line: line_no,
            label,
        })?;
        if domain.is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "empty domain".into(),
            });
        }
        if body.trim().is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "blank body".into(),
            });
        }
        if seen.insert(id.clone(), line_no).is_some() {
            return Err(Error::DuplicateId(id));
        }
        articles.push(Article {
            id,
            domain,
            title,
            body,
            label,
        });
    }
    Corpus::new(articles)
}

/// Loads a JSON-lines corpus file.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}
