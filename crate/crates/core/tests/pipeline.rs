use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use newslean::corpus::Leaning;
use newslean::encoder::{self, EncoderConfig, EncoderMode, EncoderParams};
use newslean::fusion::{loss, HeadMode};
use newslean::model::{ArticleFeatures, LeaningModel};
use newslean::report::rows_from_outcomes;
use newslean::skipgram::{train_on_sentences, train_skipgram, SkipGramParams, WordEmbeddingModel};
use newslean::split::{make_media_split, SplitSpec};
use newslean::synth::{generate, write_dataset, SynthData, SynthParams};
use newslean::train::{evaluate, predict_ids, run_matrix, train, MatrixCell, Resources, TopicEncoder, TrainConfig};
use newslean::wiki::{ingest_wiki, FixtureSource, WikiCache};

fn sentences(seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fiscal = ["cut", "raise", "lower", "the", "income", "property", "relief", "burden"];
    let military = ["deploy", "troops", "army", "soldiers", "the", "war", "navy", "overseas"];
    (0..400)
        .map(|i| {
            let (pool, keyword): (&[&str], &str) = match i % 4 {
                0 => (&fiscal, "tax"),
                1 => (&fiscal, "taxes"),
                2 => (&military, "troops"),
                _ => (&military, "weapons"),
            };
            let mut s: Vec<String> = (0..8).map(|_| pool[rng.random_range(0..pool.len())].to_owned()).collect();
            s.insert(rng.random_range(0..=s.len()), keyword.to_owned());
            s
        })
        .collect()
}

#[test]
fn inflections_sharing_contexts_end_up_close() {
    for seed in 1..=5 {
        let params = SkipGramParams {
            embed_dim: 24,
            epochs: 8,
            min_count: 1,
            sample: 0.0,
            seed,
            ..SkipGramParams::default()
        };
        let m = train_on_sentences(&sentences(seed), &params).unwrap();
        let near = m.cosine("tax", "taxes").unwrap();
        let far = m.cosine("tax", "weapons").unwrap();
        assert!(near > far, "seed {seed}: cos(tax, taxes) {near:.3} <= cos(tax, weapons) {far:.3}");
    }
}

fn sgd(layer: &mut newslean::layers::Linear, g: &newslean::layers::LinearGrad, lr: f64) {
    layer.weight.iter_mut().zip(&g.weight).for_each(|(w, d)| *w -= lr * d);
    layer.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= lr * d);
}

#[test]
fn autoencoder_reconstruction_improves_with_training() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = EncoderConfig {
        in_dim: 12,
        out_dim: 4,
        hidden_dim: 8,
        mode: EncoderMode::Autoencoder,
        recon_weight: 1.0,
    };
    let mut params = EncoderParams::init(&cfg, &mut rng).unwrap();
    let data: Vec<Vec<f64>> = (0..16)
        .map(|_| {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            (0..12).map(|j| if j % 2 == 0 { a } else { b * 0.5 }).collect()
        })
        .collect();
    let mean_loss = |p: &EncoderParams| {
        data.iter()
            .map(|v| {
                let (_, r) = encoder::autoencode(v, p).unwrap();
                encoder::reconstruction_loss(v, &r).unwrap()
            })
            .sum::<f64>()
            / data.len() as f64
    };
    let first = mean_loss(&params);
    let mut losses = vec![first];
    for _ in 0..200 {
        let mut g = params.zero_grad();
        for v in &data {
            let trace = encoder::forward(v, &params).unwrap();
            encoder::backward(&trace, &params, &[0.0; 4], 1.0 / data.len() as f64, &mut g);
        }
        sgd(&mut params.first, &g.first, 0.3);
        sgd(&mut params.second, &g.second, 0.3);
        let (g1, g2) = g.decoder.as_ref().unwrap();
        let d = params.decoder.as_mut().unwrap();
        sgd(&mut d.first, g1, 0.3);
        sgd(&mut d.second, g2, 0.3);
        losses.push(mean_loss(&params));
    }
    let last = *losses.last().unwrap();
    assert!(last < 0.5 * first, "loss {first:.4} -> {last:.4}");
    assert!(losses[100] < first && last <= losses[100]);
}

#[test]
fn encode_is_positively_homogeneous_without_biases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = EncoderParams::init(&EncoderConfig { in_dim: 10, out_dim: 3, hidden_dim: 6, ..Default::default() }, &mut rng).unwrap();
    params.first.bias.fill(0.0);
    params.second.bias.fill(0.0);
    for _ in 0..20 {
        let v: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c = rng.random_range(0.01..20.0);
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let a = encoder::encode(&scaled, &params).unwrap();
        let b = encoder::encode(&v, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - c * y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
    }
}

fn small_model(mode: HeadMode, topic: TopicEncoder) -> (LeaningModel, ArticleFeatures) {
    let cfg = TrainConfig {
        backbone_width: Some(6),
        topic_encoder: topic,
        topic_dim: 3,
        encoder_hidden_dim: 4,
        beta: 0.3,
        recon_weight: 0.7,
        head: mode,
        ..TrainConfig::default()
    };
    let backbone = cfg.load_backbone().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let model = LeaningModel::init(&cfg, backbone, 5, &mut rng).unwrap();
    let f = ArticleFeatures {
        id: "x".into(),
        domain: "d.com".into(),
        label: Leaning::Center,
        article_ids: Some(model.backbone.token_ids("alpha beta gamma alpha")),
        wiki_ids: Some(model.backbone.token_ids("delta alpha")),
        topic_mean: Some(vec![0.4, -0.2, 0.9, 0.1, -0.6]),
    };
    (model, f)
}

fn objective(m: &LeaningModel, f: &ArticleFeatures) -> f64 {
    let ce = loss(&m.forward(f).unwrap().scores, f.label);
    let recon = match &m.encoder {
        Some(e) if e.decoder.is_some() => {
            let v = f.topic_mean.as_ref().unwrap();
            let (_, r) = encoder::autoencode(v, e).unwrap();
            encoder::reconstruction_loss(v, &r).unwrap()
        }
        _ => 0.0,
    };
    ce + m.recon_weight * recon
}

fn assert_close(analytic: f64, numeric: f64, what: &str) {
    let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
    assert!(err < 1e-5, "{what}: analytic {analytic:e} numeric {numeric:e}");
}

#[test]
fn model_gradient_matches_finite_differences() {
    let h = 1e-6;
    for mode in [HeadMode::PaperRelu, HeadMode::PlainLinear] {
        for topic in [TopicEncoder::Encoder, TopicEncoder::Autoencoder] {
            let (model, f) = small_model(mode, topic);
            let mut grad = model.zero_grad();
            model.accumulate(&f, 1.0, &mut grad).unwrap();
            let fd = |edit: &dyn Fn(&mut LeaningModel, f64)| {
                let (mut plus, mut minus) = (model.clone(), model.clone());
                edit(&mut plus, h);
                edit(&mut minus, -h);
                (objective(&plus, &f) - objective(&minus, &f)) / (2.0 * h)
            };
            for i in [0, 7, 20, 40] {
                let n = fd(&|m, d| m.head.layer.weight[i] += d);
                assert_close(grad.head.weight[i], n, &format!("{mode:?}/{topic:?} head w{i}"));
            }
            for i in 0..3 {
                let n = fd(&|m, d| m.head.layer.bias[i] += d);
                assert_close(grad.head.bias[i], n, &format!("{mode:?}/{topic:?} head b{i}"));
            }
            for i in [0, 5, 13] {
                let n = fd(&|m, d| m.encoder.as_mut().unwrap().first.weight[i] += d);
                assert_close(grad.encoder.as_ref().unwrap().first.weight[i], n, &format!("{topic:?} encoder w{i}"));
            }
            if topic == TopicEncoder::Autoencoder {
                for i in [0, 9] {
                    let n = fd(&|m, d| m.encoder.as_mut().unwrap().decoder.as_mut().unwrap().second.weight[i] += d);
                    let (_, g2) = grad.encoder.as_ref().unwrap().decoder.as_ref().unwrap();
                    assert_close(g2.weight[i], n, &format!("decoder w{i}"));
                }
            }
            // "alpha" appears in both the article and the wiki text
            let alpha = f.wiki_ids.as_ref().unwrap()[1];
            for id in [alpha, f.article_ids.as_ref().unwrap()[1], f.wiki_ids.as_ref().unwrap()[0]] {
                for j in [0, 4] {
                    let n = fd(&|m, d| m.backbone.row_mut(id)[j] += d);
                    assert_close(grad.backbone[&id][j], n, &format!("row {id} [{j}]"));
                }
            }
        }
    }
}

struct Fixture {
    data: SynthData,
    wiki: WikiCache,
    embeddings: WordEmbeddingModel,
    splits: Vec<SplitSpec>,
    _dir: tempfile::TempDir,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&SynthParams {
        articles: 120,
        domains_per_leaning: 3,
        ..SynthParams::default()
    })
    .unwrap();
    let paths = write_dataset(&data, dir.path()).unwrap();
    let source = FixtureSource::open(&paths.wiki_fixtures).unwrap();
    let mut wiki = WikiCache::open(&dir.path().join("cache")).unwrap();
    ingest_wiki(data.corpus.domains(), &Default::default(), &source, &mut wiki, 2).unwrap();
    let embeddings = train_skipgram(&data.debates, &SkipGramParams { embed_dim: 30, ..Default::default() }).unwrap();
    let splits = [1, 2].iter().map(|&s| make_media_split(&data.corpus, 0.2, s).unwrap()).collect();
    Fixture {
        data,
        wiki,
        embeddings,
        splits,
        _dir: dir,
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        backbone_width: Some(12),
        topic_dim: 8,
        encoder_hidden_dim: 16,
        learning_rate: 1e-3,
        epochs: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_evaluation_is_pure() {
    let fx = fixture();
    let res = Resources::new(Some(&fx.wiki), Some(&fx.embeddings));
    let cfg = small_config();
    let split = &fx.splits[0];
    let a = train(&cfg, &fx.data.corpus, split, &res).unwrap();
    let b = train(&cfg, &fx.data.corpus, split, &res).unwrap();
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.history, b.history);
    let c = train(&TrainConfig { seed: 2, ..cfg.clone() }, &fx.data.corpus, split, &res).unwrap();
    assert_ne!(a.checkpoint.model, c.checkpoint.model);

    let before = a.checkpoint.clone();
    let m1 = evaluate(&a.checkpoint, &fx.data.corpus, &split.test_ids, &res).unwrap();
    let m2 = evaluate(&a.checkpoint, &fx.data.corpus, &split.test_ids, &res).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(a.checkpoint, before);
    let mut reversed = split.test_ids.clone();
    reversed.reverse();
    assert_eq!(evaluate(&a.checkpoint, &fx.data.corpus, &reversed, &res).unwrap(), m1);
    let forward: Vec<_> = predict_ids(&a.checkpoint, &fx.data.corpus, &split.test_ids, &res)
        .unwrap()
        .into_iter()
        .map(|(f, p)| (f.id, p))
        .collect();
    let mut backward: Vec<_> = predict_ids(&a.checkpoint, &fx.data.corpus, &reversed, &res)
        .unwrap()
        .into_iter()
        .map(|(f, p)| (f.id, p))
        .collect();
    backward.reverse();
    assert_eq!(forward, backward);
}

#[test]
fn checkpoint_round_trips_through_disk() {
    let fx = fixture();
    let res = Resources::new(Some(&fx.wiki), Some(&fx.embeddings));
    let out = train(&small_config(), &fx.data.corpus, &fx.splits[1], &res).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    out.checkpoint.save(&path).unwrap();
    let back = newslean::model::Checkpoint::load(&path).unwrap();
    assert_eq!(back, out.checkpoint);
    let missing = newslean::model::Checkpoint::load(&dir.path().join("none.json")).unwrap_err();
    assert!(matches!(missing, newslean::Error::ResourceMissing { .. }), "{missing}");
}

#[test]
fn two_by_two_matrix_gives_four_rows() {
    let fx = fixture();
    let res = Resources::new(Some(&fx.wiki), Some(&fx.embeddings));
    let configs = [
        ("base", TrainConfig { topic_encoder: TopicEncoder::None, use_wiki: false, ..small_config() }),
        ("full", small_config()),
    ];
    let cells: Vec<MatrixCell> = configs
        .iter()
        .flat_map(|(id, c)| {
            fx.splits.iter().map(|s| MatrixCell {
                experiment_id: id.to_string(),
                config: c.clone(),
                split: s.clone(),
            })
        })
        .collect();
    let serial = run_matrix(&cells, &fx.data.corpus, &res, 1);
    let parallel = run_matrix(&cells, &fx.data.corpus, &res, 3);
    let rows = rows_from_outcomes(&parallel, false);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows, rows_from_outcomes(&serial, false));
    let ids: Vec<(&str, &str)> = rows.iter().map(|r| (r.experiment_id.as_str(), r.split_id.as_str())).collect();
    assert_eq!(ids, [("base", "media-1"), ("base", "media-2"), ("full", "media-1"), ("full", "media-2")]);
}
