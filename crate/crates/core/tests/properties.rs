use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;

use newslean::corpus::{parse_corpus, Article, Corpus, Leaning};
use newslean::fusion::{fuse, loss, predict, softmax, theta_dim, NUM_CLASSES};
use newslean::metrics::MetricsReport;
use newslean::skipgram::{SkipGramParams, WordEmbeddingModel};
use newslean::split::{make_media_split, make_random_split, validate_split, SplitSpec};
use newslean::topics::{mean_of_tokens, topic_mean_vector, TopicSet};

fn leaning() -> impl Strategy<Value = Leaning> {
    (0usize..3).prop_map(|c| Leaning::from_code(c).unwrap())
}

/// Corpora where every domain owns at least one article.
fn corpus() -> impl Strategy<Value = Corpus> {
    (2usize..16).prop_flat_map(|domains| {
        prop::collection::vec((0..domains, leaning()), 0..120).prop_map(move |extra| {
            let mut articles: Vec<Article> = (0..domains)
                .map(|d| (d, Leaning::ALL[d % 3]))
                .chain(extra)
                .enumerate()
                .map(|(i, (d, label))| Article {
                    id: format!("a{i}"),
                    domain: format!("site{d}.org"),
                    title: format!("headline {i}"),
                    body: format!("body text {i}"),
                    label,
                })
                .collect();
            articles.reverse();
            Corpus::new(articles).unwrap()
        })
    })
}

fn check_partition(split: &SplitSpec, corpus: &Corpus) -> Result<(), TestCaseError> {
    let train: BTreeSet<&String> = split.train_ids.iter().collect();
    let test: BTreeSet<&String> = split.test_ids.iter().collect();
    prop_assert_eq!(train.len(), split.train_ids.len());
    prop_assert_eq!(test.len(), split.test_ids.len());
    prop_assert!(train.is_disjoint(&test));
    prop_assert_eq!(train.len() + test.len(), corpus.len());
    prop_assert!(!test.is_empty());
    Ok(())
}

fn model_from(rows: &[Vec<f64>], dim: usize) -> WordEmbeddingModel {
    let entries = rows.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.clone())).collect();
    WordEmbeddingModel::from_vectors(entries, dim, SkipGramParams { embed_dim: dim, ..Default::default() }).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn media_split_partitions_without_leaking_domains(c in corpus(), fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let split = make_media_split(&c, fraction, seed).unwrap();
        check_partition(&split, &c)?;
        let domain = |id: &String| c.get(id).unwrap().domain.clone();
        let train_domains: BTreeSet<String> = split.train_ids.iter().map(domain).collect();
        let test_domains: BTreeSet<String> = split.test_ids.iter().map(domain).collect();
        prop_assert!(train_domains.is_disjoint(&test_domains));
        prop_assert!(!train_domains.is_empty());
        prop_assert_eq!(test_domains.into_iter().collect::<Vec<_>>(), split.test_domains.clone());
        let report = validate_split(&split, &c);
        prop_assert!(report.ok, "{}", report.summary());
        prop_assert_eq!(split.clone(), make_media_split(&c, fraction, seed).unwrap());
    }

    #[test]
    fn random_split_partitions_every_article(c in corpus(), fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let split = make_random_split(&c, fraction, seed).unwrap();
        check_partition(&split, &c)?;
        prop_assert!(validate_split(&split, &c).ok);
        let round = SplitSpec::from_json(&split.to_json()).unwrap();
        prop_assert_eq!(round, split);
    }

    #[test]
    fn corpus_jsonl_round_trips(c in corpus()) {
        let back = parse_corpus(&c.to_jsonl()).unwrap();
        prop_assert_eq!(back.articles(), c.articles());
    }

    #[test]
    fn topic_mean_ignores_order_and_stays_in_the_hull(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..12),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..30),
        shuffle_seed in any::<u64>(),
    ) {
        let model = model_from(&rows, 4);
        let tokens: Vec<String> = picks.iter().map(|i| format!("w{}", i.index(rows.len()))).collect();
        let mut shuffled = tokens.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        let a = topic_mean_vector(&TopicSet { article_id: "x".into(), topics: tokens.clone() }, &model);
        let b = mean_of_tokens(&shuffled, &model);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
        let max_norm = tokens.iter().map(|t| norm(model.vector(t).unwrap())).fold(0.0, f64::max);
        prop_assert!(norm(&a) <= max_norm + 1e-9);
    }

    #[test]
    fn fusion_scales_the_knowledge_blocks(
        q in 1usize..8, r in 0usize..6, beta in 0.0f64..=1.0,
        seed in prop::collection::vec(-5.0f64..5.0, 22),
    ) {
        let delta = &seed[..q];
        let omega = &seed[8..8 + q];
        let tau = &seed[16..16 + r];
        let b = fuse(delta, omega, tau, beta).unwrap();
        prop_assert_eq!(b.theta.len(), theta_dim(q, r));
        prop_assert_eq!(&b.theta[..q], delta);
        for i in 0..q {
            prop_assert_eq!(b.theta[q + i], beta * omega[i]);
        }
        for i in 0..r {
            prop_assert_eq!(b.theta[2 * q + i], (1.0 - beta) * tau[i]);
        }
    }

    #[test]
    fn scores_are_shift_invariant_and_loss_is_nonnegative(
        s in prop::array::uniform3(-30.0f64..30.0), shift in -50.0f64..50.0, label in leaning(),
    ) {
        let shifted = s.map(|x| x + shift);
        prop_assert_eq!(predict(&s), predict(&shifted));
        let p = softmax(&s);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let l = loss(&s, label);
        prop_assert!(l >= 0.0 && l.is_finite());
        prop_assert!((l - loss(&shifted, label)).abs() < 1e-9);
        // the loss is smallest for the predicted class
        let best = (0..NUM_CLASSES).map(|c| loss(&s, Leaning::from_code(c).unwrap())).fold(f64::INFINITY, f64::min);
        prop_assert!((loss(&s, predict(&s)) - best).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_bounded(pairs in prop::collection::vec((leaning(), leaning()), 1..200)) {
        let m = MetricsReport::from_predictions(pairs.iter().copied()).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((0.0..=2.0).contains(&m.mae));
        prop_assert_eq!(m.n_test as usize, pairs.len());
        let diagonal = pairs.iter().all(|(t, p)| t == p);
        prop_assert_eq!(m.mae == 0.0, diagonal);
        prop_assert_eq!(m.accuracy == 1.0, diagonal);
        let total: u64 = m.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, pairs.len());
    }

    #[test]
    fn embedding_text_round_trip_is_exact(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 1..20),
        hash in proptest::option::of("[0-9a-f]{64}"),
    ) {
        let mut model = model_from(&rows, 3);
        model.config_hash = hash;
        let back = WordEmbeddingModel::from_text(&model.to_text()).unwrap();
        prop_assert_eq!(back.config_hash.clone(), model.config_hash.clone());
        let lookup: HashMap<&str, &[f64]> = model.vocabulary().iter().map(|t| (t.as_str(), model.vector(t).unwrap())).collect();
        prop_assert_eq!(back.len(), model.len());
        for t in back.vocabulary() {
            prop_assert_eq!(back.vector(t).unwrap(), lookup[t.as_str()]);
        }
    }
}
