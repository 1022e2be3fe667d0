//! Random (label-stratified) and media (domain-disjoint) train/test splits.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Random,
    Media,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Random => "random",
            SplitKind::Media => "media",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    #[serde(default)]
    pub test_domains: Vec<String>,
}

impl SplitSpec {
    /// Short identifier used in file names and result rows, e.g. `media-7`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.kind.as_str(), self.seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fraction {fraction} must lie strictly between 0 and 1"
        )))
    }
}

/// Holds out all articles of a uniformly sampled subset of publisher domains.
///
/// The number of test domains is `round(fraction * m)`, clamped to `[1, m - 1]`.
pub fn make_media_split(corpus: &Corpus, test_domain_fraction: f64, seed: u64) -> Result<SplitSpec> {
    check_fraction(test_domain_fraction)?;
    let m = corpus.domain_count();
    if m < 2 {
        return Err(Error::TooFewDomains(m));
    }
    let k = ((test_domain_fraction * m as f64).round() as usize).clamp(1, m - 1);

    let mut domains: Vec<&String> = corpus.domains().iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    domains.shuffle(&mut rng);
    let test_domains: BTreeSet<String> = domains[..k].iter().map(|d| (*d).clone()).collect();

    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for a in corpus.articles() {
        if test_domains.contains(&a.domain) {
            test_ids.push(a.id.clone());
        } else {
            train_ids.push(a.id.clone());
        }
    }
    Ok(SplitSpec {
        kind: SplitKind::Media,
        seed,
        train_ids,
        test_ids,
        test_domains: test_domains.into_iter().collect(),
    })
}

/// Per-class test quotas by largest-remainder apportionment of
/// `round(fraction * l)` (at least 1, at most `l - 1` when `l > 1`).
fn stratified_quotas(counts: [usize; 3], fraction: f64) -> [usize; 3] {
    let total: usize = counts.iter().sum();
    let mut target = ((fraction * total as f64).round() as usize).max(1);
    if total > 1 {
        target = target.min(total - 1);
    }
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * fraction).collect();
    let mut quotas = [0usize; 3];
    for c in 0..3 {
        quotas[c] = (exact[c].floor() as usize).min(counts[c]);
    }
    let mut assigned: usize = quotas.iter().sum();
    // Largest fractional remainder first; ties go to the lower class code.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    while assigned < target {
        let mut progressed = false;
        for &c in &order {
            if assigned < target && quotas[c] < counts[c] {
                quotas[c] += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    while assigned > target {
        // only reachable when flooring overshoots the l-1 cap
        let c = (0..3).rev().max_by_key(|&c| quotas[c]).unwrap();
        quotas[c] -= 1;
        assigned -= 1;
    }
    quotas
}

/// Article-level shuffle split, stratified by label.
pub fn make_random_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<SplitSpec> {
    check_fraction(test_fraction)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let quotas = stratified_quotas(corpus.label_counts(), test_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_positions = HashSet::new();
    for (class, &quota) in quotas.iter().enumerate() {
        let mut members: Vec<usize> = corpus
            .articles()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.label.code() == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        test_positions.extend(members.into_iter().take(quota));
    }
    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (i, a) in corpus.articles().iter().enumerate() {
        if test_positions.contains(&i) {
            test_ids.push(a.id.clone());
        } else {
            train_ids.push(a.id.clone());
        }
    }
    Ok(SplitSpec {
        kind: SplitKind::Random,
        seed,
        train_ids,
        test_ids,
        test_domains: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Corpus ids that appear in neither partition.
    Coverage { missing_ids: Vec<String> },
    /// Split ids that do not exist in the corpus.
    UnknownIds { ids: Vec<String> },
    /// Ids listed in both partitions (or twice in one).
    Overlap { ids: Vec<String> },
    /// Domains present in both partitions of a media split.
    DomainLeak { domains: Vec<String> },
    /// `test_domains` disagrees with the domains actually found in the test set.
    TestDomainsMismatch { recorded: Vec<String>, actual: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub leaked_domains: Vec<String>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        if self.ok {
            format!("ok: {} train / {} test", self.n_train, self.n_test)
        } else {
            let kinds: Vec<String> = self
                .violations
                .iter()
                .map(|v| match v {
                    Violation::Coverage { missing_ids } => {
                        format!("{} id(s) uncovered", missing_ids.len())
                    }
                    Violation::UnknownIds { ids } => format!("{} unknown id(s)", ids.len()),
                    Violation::Overlap { ids } => format!("{} overlapping id(s)", ids.len()),
                    Violation::DomainLeak { domains } => {
                        format!("leaked domains {}", domains.join(","))
                    }
                    Violation::TestDomainsMismatch { .. } => "test_domains mismatch".to_owned(),
                })
                .collect();
            format!("FATAL: {}", kinds.join("; "))
        }
    }
}

/// Checks coverage, disjointness and, for media splits, domain disjointness.
/// Every violation is fatal.
pub fn validate_split(split: &SplitSpec, corpus: &Corpus) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = HashSet::new();
    let mut overlap = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for id in split.train_ids.iter().chain(&split.test_ids) {
        if !seen.insert(id.as_str()) {
            overlap.insert(id.clone());
        }
        if corpus.get(id).is_none() {
            unknown.insert(id.clone());
        }
    }
    let missing: Vec<String> = corpus
        .articles()
        .iter()
        .filter(|a| !seen.contains(a.id.as_str()))
        .map(|a| a.id.clone())
        .collect();
    if !missing.is_empty() {
        violations.push(Violation::Coverage { missing_ids: missing });
    }
    if !unknown.is_empty() {
        violations.push(Violation::UnknownIds {
            ids: unknown.into_iter().collect(),
        });
    }
    if !overlap.is_empty() {
        violations.push(Violation::Overlap {
            ids: overlap.into_iter().collect(),
        });
    }

    let domains_of = |ids: &[String]| -> BTreeSet<String> {
        ids.iter()
            .filter_map(|id| corpus.get(id))
            .map(|a| a.domain.clone())
            .collect()
    };
    let mut leaked_domains = Vec::new();
    if split.kind == SplitKind::Media {
        let train_domains = domains_of(&split.train_ids);
        let test_domains = domains_of(&split.test_ids);
        leaked_domains = train_domains.intersection(&test_domains).cloned().collect();
        if !leaked_domains.is_empty() {
            violations.push(Violation::DomainLeak {
                domains: leaked_domains.clone(),
            });
        }
        let recorded: BTreeSet<String> = split.test_domains.iter().cloned().collect();
        if recorded != test_domains {
            violations.push(Violation::TestDomainsMismatch {
                recorded: recorded.into_iter().collect(),
                actual: test_domains.into_iter().collect(),
            });
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        n_train: split.train_ids.len(),
        n_test: split.test_ids.len(),
        leaked_domains,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, Leaning};

    fn corpus(n_domains: usize, per_domain: usize) -> Corpus {
        let mut articles = Vec::new();
        for d in 0..n_domains {
            for j in 0..per_domain {
                articles.push(Article {
                    id: format!("d{d}-a{j}"),
                    domain: format!("site{d}.com"),
                    title: String::new(),
                    body: "text".into(),
                    label: Leaning::from_code(d % 3).unwrap(),
                });
            }
        }
        Corpus::new(articles).unwrap()
    }

    fn labelled(counts: [usize; 3]) -> Corpus {
        let mut articles = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for j in 0..n {
                articles.push(Article {
                    id: format!("c{c}-{j}"),
                    domain: format!("site{}.com", j % 7),
                    title: String::new(),
                    body: "text".into(),
                    label: Leaning::from_code(c).unwrap(),
                });
            }
        }
        Corpus::new(articles).unwrap()
    }

    #[test]
    fn ten_domains_at_seven_percent_gives_one_test_domain() {
        let c = corpus(10, 4);
        let s = make_media_split(&c, 0.07, 3).unwrap();
        assert_eq!(s.test_domains.len(), 1);
        assert_eq!(s.test_ids.len(), 4);
        assert!(validate_split(&s, &c).ok);
    }

    #[test]
    fn media_split_is_deterministic() {
        let c = corpus(20, 3);
        let a = make_media_split(&c, 0.2, 42).unwrap();
        let b = make_media_split(&c, 0.2, 42).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn media_split_needs_two_domains() {
        let c = corpus(1, 5);
        assert!(matches!(make_media_split(&c, 0.5, 0), Err(Error::TooFewDomains(1))));
    }

    #[test]
    fn fraction_bounds() {
        let c = corpus(4, 2);
        assert!(make_media_split(&c, 0.0, 0).is_err());
        assert!(make_random_split(&c, 1.0, 0).is_err());
    }

    #[test]
    fn random_split_stratifies_34_33_33() {
        let c = labelled([34, 33, 33]);
        let s = make_random_split(&c, 0.2, 1).unwrap();
        assert_eq!(s.test_ids.len(), 20);
        let mut per = [0usize; 3];
        for id in &s.test_ids {
            per[c.get(id).unwrap().label.code()] += 1;
        }
        assert_eq!(per, [7, 7, 6]);
        assert!(validate_split(&s, &c).ok);
    }

    #[test]
    fn random_split_clamps_to_one() {
        let c = labelled([34, 33, 33]);
        let s = make_random_split(&c, 0.0001, 1).unwrap();
        assert_eq!(s.test_ids.len(), 1);
    }

    #[test]
    fn random_split_seed_changes_selection() {
        let c = labelled([34, 33, 33]);
        let a = make_random_split(&c, 0.2, 1).unwrap();
        let b = make_random_split(&c, 0.2, 2).unwrap();
        let sa: BTreeSet<_> = a.test_ids.iter().collect();
        let sb: BTreeSet<_> = b.test_ids.iter().collect();
        assert_ne!(sa, sb);
    }

    #[test]
    fn empty_corpus_random_split() {
        let c = Corpus::new(Vec::new()).unwrap();
        assert!(matches!(make_random_split(&c, 0.5, 0), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn detects_shared_domain() {
        let c = corpus(3, 2);
        let s = SplitSpec {
            kind: SplitKind::Media,
            seed: 0,
            train_ids: vec!["d0-a0".into(), "d1-a0".into(), "d1-a1".into(), "d2-a0".into(), "d2-a1".into()],
            test_ids: vec!["d0-a1".into()],
            test_domains: vec!["site0.com".into()],
        };
        let r = validate_split(&s, &c);
        assert!(!r.ok);
        assert_eq!(r.leaked_domains, vec!["site0.com".to_string()]);
    }

    #[test]
    fn detects_missing_id() {
        let c = corpus(2, 2);
        let mut s = make_media_split(&c, 0.5, 9).unwrap();
        let dropped = s.train_ids.pop().unwrap();
        let r = validate_split(&s, &c);
        assert!(!r.ok);
        assert!(r
            .violations
            .contains(&Violation::Coverage { missing_ids: vec![dropped] }));
    }

    #[test]
    fn detects_unknown_and_overlap() {
        let c = corpus(2, 2);
        let mut s = make_media_split(&c, 0.5, 9).unwrap();
        s.test_ids.push("ghost".into());
        s.test_ids.push(s.train_ids[0].clone());
        let r = validate_split(&s, &c);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::UnknownIds { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Overlap { .. })));
    }

    #[test]
    fn json_round_trip() {
        let c = corpus(5, 2);
        let s = make_media_split(&c, 0.4, 5).unwrap();
        assert_eq!(SplitSpec::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn quotas_sum_to_target() {
        assert_eq!(stratified_quotas([1, 1, 0], 0.5), [1, 0, 0]);
        assert_eq!(stratified_quotas([10, 0, 0], 0.99), [9, 0, 0]);
    }
}
