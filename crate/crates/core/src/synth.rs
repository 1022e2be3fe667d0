//! Synthetic corpus generator for desk-scale experiments and tests.
//!
//! Each publisher gets its own signature vocabulary and a leaning; articles
//! inherit the publisher's leaning and mix signature words, weakly
//! label-correlated topic words and filler. Wikipedia fixture pages describe
//! each outlet's leaning in words shared across outlets; some outlets have
//! no page. Debate speeches use each party's topic words.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus, Leaning};
use crate::debates::{debates_to_jsonl, DebateSpeech, Party};
use crate::error::{Error, Result};
use crate::wiki::fixture_page_filename;

const LEFT_TOPICS: &[&str] = &[
    "healthcare", "climate", "equality", "union", "wages", "medicare", "renewable", "abortion",
    "immigrants", "diversity", "welfare", "emissions", "childcare", "voting", "minimum", "housing",
];
const RIGHT_TOPICS: &[&str] = &[
    "taxes", "border", "guns", "military", "deregulation", "faith", "police", "sovereignty",
    "deficit", "crime", "energy", "liberty", "enforcement", "tariffs", "veterans", "business",
];
const CENTER_TOPICS: &[&str] = &[
    "budget", "committee", "report", "analysis", "survey", "forecast", "agency", "statistics",
    "bipartisan", "negotiation", "review", "hearing", "schedule", "procedure", "quarterly", "audit",
];
const LEFT_DESCRIPTORS: &[&str] = &["progressive", "liberal", "left-leaning", "social democratic", "activist"];
const RIGHT_DESCRIPTORS: &[&str] = &["conservative", "right-wing", "traditionalist", "nationalist", "libertarian"];
const CENTER_DESCRIPTORS: &[&str] = &["centrist", "nonpartisan", "neutral", "moderate", "independent"];

const FILLER: &[&str] = &[
    "people", "year", "time", "government", "state", "city", "week", "public", "official", "group",
    "plan", "issue", "country", "leaders", "members", "officials", "according", "including", "percent",
    "million", "program", "number", "national", "local", "federal", "new", "said", "statement",
    "monday", "tuesday", "wednesday", "thursday", "friday", "morning", "evening", "meeting", "office",
    "department", "president", "senator", "governor", "mayor", "campaign", "election", "vote", "law",
    "bill", "court", "case", "decision", "policy", "support", "opposition", "change", "debate",
    "question", "answer", "event", "community", "family", "school", "market", "company", "industry",
    "worker", "market", "price", "cost", "money", "fund", "service", "system", "power", "security",
    "region", "world", "nation", "party", "office", "record", "history", "future", "news", "story",
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ve", "tu", "zo", "ne", "pi", "sa", "do", "fe", "gu", "ha", "ji", "wo",
    "bri", "cla", "dro", "fen", "gor", "hal", "kir", "lum", "mor", "nix", "pol", "quen", "rus", "tal",
];

const PLACES: &[&str] = &[
    "northgate", "riverside", "lakeview", "summit", "harbor", "granite", "oakridge", "pinecrest",
    "silverton", "westbrook", "eastfield", "stonebridge", "clearwater", "redwood", "highland",
    "meadow", "fairport", "kingsley", "ashford", "brookline", "cedar", "dunmore", "elmwood",
    "foxhill", "glendale", "hawthorne", "ironwood", "juniper", "kestrel", "larchmont",
];
const OUTLETS: &[&str] = &["times", "post", "herald", "dispatch", "tribune", "chronicle", "journal", "ledger", "gazette", "observer"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    pub domains_per_leaning: usize,
    pub articles: usize,
    pub body_tokens: usize,
    /// Probability that a body token is one of the outlet's signature words.
    pub signature_rate: f64,
    /// Probability that a body token is a topic word.
    pub topic_rate: f64,
    /// Probability that a topic word comes from the article's own leaning.
    pub topic_fidelity: f64,
    pub wiki_missing_fraction: f64,
    pub speeches_per_party: usize,
    pub speech_tokens: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 7,
            domains_per_leaning: 10,
            articles: 600,
            body_tokens: 60,
            signature_rate: 0.2,
            topic_rate: 0.05,
            topic_fidelity: 0.5,
            wiki_missing_fraction: 0.15,
            speeches_per_party: 80,
            speech_tokens: 80,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutlet {
    pub domain: String,
    pub name: String,
    pub leaning: Leaning,
    pub signature: Vec<String>,
    /// Raw wikitext, absent when the outlet has no page.
    pub wiki: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub outlets: Vec<SynthOutlet>,
    pub corpus: Corpus,
    pub debates: Vec<DebateSpeech>,
}

fn topics_for(l: Leaning) -> &'static [&'static str] {
    match l {
        Leaning::Left => LEFT_TOPICS,
        Leaning::Center => CENTER_TOPICS,
        Leaning::Right => RIGHT_TOPICS,
    }
}

fn descriptors_for(l: Leaning) -> &'static [&'static str] {
    match l {
        Leaning::Left => LEFT_DESCRIPTORS,
        Leaning::Center => CENTER_DESCRIPTORS,
        Leaning::Right => RIGHT_DESCRIPTORS,
    }
}

fn pseudoword<R: Rng>(rng: &mut R) -> String {
    (0..3).map(|_| *SYLLABLES.choose(rng).expect("syllables")).collect()
}

fn pick<R: Rng>(rng: &mut R, pool: &[&str]) -> String {
    (*pool.choose(rng).expect("non-empty pool")).to_owned()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn wiki_page<R: Rng>(rng: &mut R, name: &str, leaning: Leaning, signature: &[String]) -> String {
    let desc = descriptors_for(leaning);
    let mut paras = Vec::new();
    paras.push(format!(
        "'''{name}''' is an American news outlet founded in {} and based in [[{}]]. \
         It is widely described as [[{}]] and {}.<ref>{{{{cite web|title=Media bias}}}}</ref>",
        1900 + rng.random_range(0..120),
        capitalize(&pick(rng, PLACES)),
        pick(rng, desc),
        pick(rng, desc),
    ));
    for _ in 0..3 {
        let words: Vec<String> = (0..25)
            .map(|_| match rng.random_range(0..10) {
                0..=2 => pick(rng, desc),
                3 => signature.choose(rng).expect("signature").clone(),
                _ => pick(rng, FILLER),
            })
            .collect();
        paras.push(words.join(" ") + ".");
    }
    format!(
        "{{{{Infobox newspaper\n| name = {name}\n| political = {}\n}}}}\n{}\n\n== References ==\n{{{{reflist}}}}\n",
        pick(rng, desc),
        paras.join("\n\n")
    )
}

fn make_outlets<R: Rng>(rng: &mut R, p: &SynthParams) -> Vec<SynthOutlet> {
    let n = 3 * p.domains_per_leaning;
    let mut names = Vec::new();
    let mut i = 0;
    while names.len() < n {
        let place = PLACES[i % PLACES.len()];
        let outlet = OUTLETS[(i / PLACES.len() + i * 7) % OUTLETS.len()];
        let candidate = (place, outlet);
        if !names.contains(&candidate) {
            names.push(candidate);
        }
        i += 1;
    }
    let missing = (p.wiki_missing_fraction * n as f64).round() as usize;
    let mut has_page: Vec<bool> = (0..n).map(|k| k >= missing).collect();
    has_page.shuffle(rng);
    names
        .into_iter()
        .enumerate()
        .map(|(k, (place, outlet))| {
            let leaning = Leaning::ALL[k % 3];
            let name = format!("The {} {}", capitalize(place), capitalize(outlet));
            let mut signature = vec![format!("{place}{outlet}")];
            while signature.len() < 5 {
                let w = pseudoword(rng);
                if !signature.contains(&w) {
                    signature.push(w);
                }
            }
            let wiki = has_page[k].then(|| wiki_page(rng, &name, leaning, &signature));
            SynthOutlet {
                domain: format!("{place}{outlet}.com"),
                name,
                leaning,
                signature,
                wiki,
            }
        })
        .collect()
}

fn topic_word<R: Rng>(rng: &mut R, own: Leaning, fidelity: f64) -> String {
    let l = if rng.random_bool(fidelity) {
        own
    } else {
        *Leaning::ALL.choose(rng).expect("three leanings")
    };
    pick(rng, topics_for(l))
}

pub fn generate(p: &SynthParams) -> Result<SynthData> {
    if p.domains_per_leaning == 0 || p.articles == 0 || p.body_tokens == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs domains, articles and tokens".into()));
    }
    for (name, v) in [
        ("signature_rate", p.signature_rate),
        ("topic_rate", p.topic_rate),
        ("topic_fidelity", p.topic_fidelity),
        ("wiki_missing_fraction", p.wiki_missing_fraction),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1]")));
        }
    }
    if p.signature_rate + p.topic_rate > 1.0 {
        return Err(Error::InvalidArgument("signature_rate + topic_rate exceeds 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let outlets = make_outlets(&mut rng, p);

    let articles = (0..p.articles)
        .map(|i| {
            let o = &outlets[i % outlets.len()];
            let token = |rng: &mut ChaCha8Rng| {
                let u: f64 = rng.random();
                if u < p.signature_rate {
                    o.signature.choose(rng).expect("signature").clone()
                } else if u < p.signature_rate + p.topic_rate {
                    topic_word(rng, o.leaning, p.topic_fidelity)
                } else {
                    pick(rng, FILLER)
                }
            };
            let title: Vec<String> = (0..6).map(|_| token(&mut rng)).collect();
            let body: Vec<String> = (0..p.body_tokens).map(|_| token(&mut rng)).collect();
            Article {
                id: format!("art-{i:05}"),
                domain: o.domain.clone(),
                title: capitalize(&title.join(" ")),
                body: body.join(" ") + ".",
                label: o.leaning,
            }
        })
        .collect();
    let corpus = Corpus::new(articles)?;

    let mut debates = Vec::new();
    for (party, own) in [(Party::Democrat, Leaning::Left), (Party::Republican, Leaning::Right)] {
        for k in 0..p.speeches_per_party {
            let words: Vec<String> = (0..p.speech_tokens)
                .map(|_| {
                    if rng.random_bool(0.35) {
                        topic_word(&mut rng, own, 0.85)
                    } else {
                        pick(&mut rng, FILLER)
                    }
                })
                .collect();
            debates.push(DebateSpeech {
                id: format!("{}-{k:04}", party.as_str()),
                speaker: format!("{} speaker {}", capitalize(party.as_str()), k % 7),
                party,
                text: words.join(" ") + ".",
            });
        }
    }
    Ok(SynthData {
        outlets,
        corpus,
        debates,
    })
}

/// Paths written by [`write_dataset`].
#[derive(Clone, Debug)]
pub struct SynthPaths {
    pub corpus: std::path::PathBuf,
    pub debates: std::path::PathBuf,
    pub wiki_fixtures: std::path::PathBuf,
}

/// Writes `corpus.jsonl`, `debates.jsonl` and `wiki_fixtures/` under `dir`.
pub fn write_dataset(data: &SynthData, dir: &Path) -> Result<SynthPaths> {
    let fixtures = dir.join("wiki_fixtures");
    std::fs::create_dir_all(&fixtures).map_err(|e| Error::io(&fixtures, e))?;
    let write = |path: std::path::PathBuf, text: &str| -> Result<std::path::PathBuf> {
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let corpus = write(dir.join("corpus.jsonl"), &data.corpus.to_jsonl())?;
    let debates = write(dir.join("debates.jsonl"), &debates_to_jsonl(&data.debates))?;
    let mut index = BTreeMap::new();
    for o in &data.outlets {
        if let Some(text) = &o.wiki {
            index.insert(o.domain.clone(), o.name.clone());
            write(fixtures.join(fixture_page_filename(&o.name)), text)?;
        }
    }
    write(fixtures.join("index.json"), &serde_json::to_string_pretty(&index)?)?;
    Ok(SynthPaths {
        corpus,
        debates,
        wiki_fixtures: fixtures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let p = SynthParams::default();
        let a = generate(&p).unwrap();
        assert_eq!(a.corpus.len(), 600);
        assert_eq!(a.corpus.domain_count(), 30);
        assert_eq!(a.outlets.iter().filter(|o| o.wiki.is_none()).count(), 5);
        assert_eq!(a.corpus.label_counts(), [200, 200, 200]);
        let b = generate(&p).unwrap();
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_eq!(debates_to_jsonl(&a.debates), debates_to_jsonl(&b.debates));
    }

    #[test]
    fn rejects_bad_rates() {
        let p = SynthParams {
            signature_rate: 0.8,
            topic_rate: 0.5,
            ..SynthParams::default()
        };
        assert!(generate(&p).is_err());
    }

    #[test]
    fn writes_loadable_files() {
        let dir = tempfile::tempdir().unwrap();
        let data = generate(&SynthParams {
            articles: 30,
            domains_per_leaning: 2,
            ..SynthParams::default()
        })
        .unwrap();
        let paths = write_dataset(&data, dir.path()).unwrap();
        let corpus = crate::corpus::load_corpus(&paths.corpus).unwrap();
        assert_eq!(corpus.len(), 30);
        assert_eq!(crate::debates::load_debates(&paths.debates).unwrap().len(), 160);
        assert!(paths.wiki_fixtures.join("index.json").exists());
    }
}
