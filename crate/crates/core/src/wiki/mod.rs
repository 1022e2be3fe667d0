//! Publisher-domain Wikipedia knowledge: domain -> page resolution, fetching,
//! an on-disk cache and the per-article text fed to the backbone.

mod cache;
mod markup;
mod source;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use chrono::Utc;
use serde::{Deserialize, Serialize};

pub use cache::{decode_domain_filename, encode_domain_filename, WikiCache, WikiDoc};
pub use markup::strip_wikitext;
pub use source::{
    fixture_page_filename, parse_overrides, parse_revision_response, FetchedPage, FixtureSource,
    HttpConfig, HttpSource, WikiSource,
};

use crate::corpus::Article;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WikiTitle {
    Page(String),
    NotFound,
}

/// Resolves a publisher domain to a page title: manual override first, then
/// the source's search, else `NotFound`.
pub fn map_domain_to_wiki(
    domain: &str,
    overrides: &BTreeMap<String, String>,
    source: Option<&dyn WikiSource>,
) -> Result<WikiTitle> {
    if let Some(title) = overrides.get(domain) {
        return Ok(WikiTitle::Page(title.clone()));
    }
    match source {
        Some(src) => Ok(src
            .search(domain)?
            .map_or(WikiTitle::NotFound, WikiTitle::Page)),
        None => Ok(WikiTitle::NotFound),
    }
}

fn doc_from_page(domain: &str, requested: &str, page: FetchedPage) -> WikiDoc {
    match page {
        FetchedPage::Found { title, wikitext } => {
            let body = strip_wikitext(&wikitext);
            if body.trim().is_empty() {
                WikiDoc::not_found(domain, &title)
            } else {
                WikiDoc {
                    domain: domain.to_owned(),
                    title,
                    body,
                    fetched_at: Utc::now(),
                    found: true,
                }
            }
        }
        FetchedPage::Gone => WikiDoc::not_found(domain, requested),
    }
}

/// Fetches `title` for `domain` through the cache. A domain already cached,
/// or a title already fetched for another domain, costs no source call.
pub fn fetch_wiki_doc(
    domain: &str,
    title: &str,
    source: &dyn WikiSource,
    cache: &mut WikiCache,
) -> Result<WikiDoc> {
    if let Some(doc) = cache.get(domain) {
        return Ok(doc.clone());
    }
    if let Some(doc) = cache.find_title(title) {
        let mut copy = doc.clone();
        copy.domain = domain.to_owned();
        return cache.insert(copy);
    }
    let page = source.fetch(title)?;
    cache.insert(doc_from_page(domain, title, page))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub domains: usize,
    pub already_cached: usize,
    pub found: usize,
    pub not_found: usize,
    pub failed: Vec<String>,
}

/// Resolves and fetches every domain missing from the cache using up to
/// `parallelism` worker threads. Failures are collected; successful entries
/// stay cached so a rerun resumes where this one stopped.
pub fn ingest_wiki<'a>(
    domains: impl IntoIterator<Item = &'a String>,
    overrides: &BTreeMap<String, String>,
    source: &dyn WikiSource,
    cache: &mut WikiCache,
    parallelism: usize,
) -> Result<IngestReport> {
    let domains: Vec<String> = domains.into_iter().cloned().collect();
    let mut report = IngestReport {
        domains: domains.len(),
        ..Default::default()
    };
    let pending: VecDeque<String> = domains
        .iter()
        .filter(|d| {
            let cached = cache.contains(d);
            if cached {
                report.already_cached += 1;
            }
            !cached
        })
        .cloned()
        .collect();

    let workers = parallelism.max(1).min(pending.len().max(1));
    let queue = Mutex::new(pending);
    let shared = Mutex::new(&mut *cache);
    let failures: Mutex<Vec<(String, Error)>> = Mutex::new(Vec::new());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(domain) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let outcome = (|| -> Result<()> {
                    match map_domain_to_wiki(&domain, overrides, Some(source))? {
                        WikiTitle::NotFound => {
                            shared.lock().unwrap().insert(WikiDoc::not_found(&domain, ""))?;
                        }
                        WikiTitle::Page(title) => {
                            let reuse = shared.lock().unwrap().find_title(&title).cloned();
                            let doc = match reuse {
                                Some(mut d) => {
                                    d.domain = domain.clone();
                                    d
                                }
                                None => doc_from_page(&domain, &title, source.fetch(&title)?),
                            };
                            shared.lock().unwrap().insert(doc)?;
                        }
                    }
                    Ok(())
                })();
                if let Err(e) = outcome {
                    log::warn!("wiki ingest failed for {domain}: {e}");
                    failures.lock().unwrap().push((domain, e));
                }
            });
        }
    });
    for d in &domains {
        match cache.get(d) {
            Some(doc) if doc.found => report.found += 1,
            Some(_) => report.not_found += 1,
            None => {}
        }
    }
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by(|a, b| a.0.cmp(&b.0));
    report.failed = failures.iter().map(|(d, _)| d.clone()).collect();
    Ok(report)
}

/// Wikipedia text for an article's publisher: `title + "\n" + body` when a
/// page was found, the empty string for a recorded absence.
pub fn wiki_text_for_article(article: &Article, cache: &WikiCache) -> Result<String> {
    wiki_text_for_domain(&article.domain, cache)
}

pub fn wiki_text_for_domain(domain: &str, cache: &WikiCache) -> Result<String> {
    match cache.get(domain) {
        Some(doc) if doc.found => Ok(format!("{}\n{}", doc.title, doc.body)),
        Some(_) => Ok(String::new()),
        None => Err(Error::CacheMiss(domain.to_owned())),
    }
}
