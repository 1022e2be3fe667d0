use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde_json::Value;

use crate::error::{Error, Result};

/// Raw page content as returned by a source, before markup stripping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FetchedPage {
    Found { title: String, wikitext: String },
    Gone,
}

/// Where page titles and page content come from.
pub trait WikiSource: Send + Sync {
    /// Best-effort title lookup for a publisher domain.
    fn search(&self, domain: &str) -> Result<Option<String>>;

    fn fetch(&self, title: &str) -> Result<FetchedPage>;

    /// Number of `search` + `fetch` calls that reached the backing store.
    fn calls(&self) -> usize;
}

/// Offline snapshot directory.
///
/// Layout: `index.json` (optional, domain -> title) plus one
/// `<percent-encoded title>.wiki` file of raw wikitext per page. A missing
/// page file means the page is gone.
#[derive(Debug)]
pub struct FixtureSource {
    dir: PathBuf,
    index: BTreeMap<String, String>,
    calls: AtomicUsize,
}

pub fn fixture_page_filename(title: &str) -> String {
    format!("{}.wiki", utf8_percent_encode(title, NON_ALPHANUMERIC))
}

impl FixtureSource {
    pub fn open(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::missing(
                format!("offline fixture directory {}", dir.display()),
                "ingest-wiki",
            ));
        }
        let index_path = dir.join("index.json");
        let index = if index_path.exists() {
            let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
            parse_overrides(&text)?
        } else {
            BTreeMap::new()
        };
        Ok(FixtureSource {
            dir: dir.to_path_buf(),
            index,
            calls: AtomicUsize::new(0),
        })
    }
}

impl WikiSource for FixtureSource {
    fn search(&self, domain: &str) -> Result<Option<String>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.index.get(domain).cloned())
    }

    fn fetch(&self, title: &str) -> Result<FetchedPage> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.join(fixture_page_filename(title));
        match std::fs::read_to_string(&path) {
            Ok(wikitext) => Ok(FetchedPage::Found {
                title: title.to_owned(),
                wikitext,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(FetchedPage::Gone),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Parses a JSON object mapping domain -> page title. Domains are normalized.
pub fn parse_overrides(text: &str) -> Result<BTreeMap<String, String>> {
    let raw: BTreeMap<String, String> = serde_json::from_str(text)?;
    Ok(raw
        .into_iter()
        .map(|(d, t)| (crate::corpus::normalize_domain(&d), t))
        .collect())
}

#[derive(Clone, Debug)]
pub struct HttpConfig {
    pub endpoint: String,
    pub user_agent: String,
    pub max_retries: u32,
    pub backoff: Duration,
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://en.wikipedia.org/w/api.php".into(),
            user_agent: concat!("newslean/", env!("CARGO_PKG_VERSION"), " (research pipeline)").into(),
            max_retries: 4,
            backoff: Duration::from_millis(500),
            min_interval: Duration::from_millis(100),
            timeout: Duration::from_secs(30),
        }
    }
}

/// MediaWiki action API client with bounded retries, exponential backoff
/// and a minimum interval between requests.
pub struct HttpSource {
    agent: ureq::Agent,
    config: HttpConfig,
    last_request: Mutex<Option<Instant>>,
    calls: AtomicUsize,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(String),
}

impl HttpSource {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .user_agent(config.user_agent.as_str())
            .build()
            .into();
        HttpSource {
            agent,
            config,
            last_request: Mutex::new(None),
            calls: AtomicUsize::new(0),
        }
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.config.min_interval {
                thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, params: &[(&str, &str)]) -> Attempt {
        self.pace();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.get(&self.config.endpoint);
        for (k, v) in params {
            req = req.query(*k, *v);
        }
        match req.call() {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_string();
                match (status, body) {
                    (200..=299, Ok(text)) => Attempt::Done(text),
                    (429 | 500..=599, _) => Attempt::Retry(format!("HTTP {status}")),
                    (_, Err(e)) => Attempt::Retry(e.to_string()),
                    (s, Ok(_)) => Attempt::Fail(format!("HTTP {s}")),
                }
            }
            Err(e) => Attempt::Retry(e.to_string()),
        }
    }

    fn get_json(&self, params: &[(&str, &str)]) -> Result<Value> {
        let mut delay = self.config.backoff;
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                log::warn!("wiki request failed ({last_err}); retry {attempt} in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(params) {
                Attempt::Done(text) => {
                    return serde_json::from_str(&text)
                        .map_err(|e| Error::Network(format!("bad JSON from API: {e}")));
                }
                Attempt::Retry(msg) => last_err = msg,
                Attempt::Fail(msg) => return Err(Error::Network(msg)),
            }
        }
        Err(Error::Network(format!(
            "giving up after {} attempts: {last_err}",
            self.config.max_retries + 1
        )))
    }
}

impl WikiSource for HttpSource {
    fn search(&self, domain: &str) -> Result<Option<String>> {
        let v = self.get_json(&[
            ("action", "query"),
            ("list", "search"),
            ("srsearch", domain),
            ("srlimit", "1"),
            ("format", "json"),
            ("formatversion", "2"),
        ])?;
        Ok(v.pointer("/query/search/0/title")
            .and_then(Value::as_str)
            .map(str::to_owned))
    }

    fn fetch(&self, title: &str) -> Result<FetchedPage> {
        let v = self.get_json(&[
            ("action", "query"),
            ("prop", "revisions"),
            ("rvprop", "content"),
            ("rvslots", "main"),
            ("redirects", "1"),
            ("titles", title),
            ("format", "json"),
            ("formatversion", "2"),
        ])?;
        parse_revision_response(&v)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Interprets an `action=query&prop=revisions` response (format version 2).
pub fn parse_revision_response(v: &Value) -> Result<FetchedPage> {
    if let Some(err) = v.get("error") {
        return Err(Error::Network(format!("API error: {err}")));
    }
    let Some(page) = v.pointer("/query/pages/0") else {
        return Ok(FetchedPage::Gone);
    };
    if page.get("missing").is_some() || page.get("invalid").is_some() {
        return Ok(FetchedPage::Gone);
    }
    let title = page.get("title").and_then(Value::as_str).unwrap_or_default();
    match page
        .pointer("/revisions/0/slots/main/content")
        .and_then(Value::as_str)
    {
        Some(text) => Ok(FetchedPage::Found {
            title: title.to_owned(),
            wikitext: text.to_owned(),
        }),
        None => Ok(FetchedPage::Gone),
    }
}
