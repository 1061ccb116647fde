mod common;

use proptest::prelude::*;
use tnlp::neural::{gradient_check, seeded_rng, TrainConfig};
use tnlp::pipeline::toy_train_config;
use tnlp::sentiment::{decide, train_sentiment, Sentiment, SentimentConfig, SentimentExample, SentimentModel};

fn config(vocab: usize, dim: usize) -> SentimentConfig {
    SentimentConfig {
        subword_embed_dim: dim,
        rnn_hidden: dim,
        num_bigru_layers: 2,
        fc_units: dim,
        vocab_size: vocab,
        max_tokens: 256,
    }
}

fn labelled(pairs: &[(&str, bool)]) -> Vec<(String, bool)> {
    pairs.iter().map(|(t, l)| (t.to_string(), *l)).collect()
}

#[test]
fn separates_harika_from_berbat() {
    let vocab = common::toy_vocab();
    let mut m = SentimentModel::new(config(vocab.len(), 16), 0).unwrap();
    let data = labelled(&[("harika", true), ("berbat", false), ("bu film harika", true), ("bu film berbat", false)]);
    let losses = train_sentiment(&mut m, &data, &vocab, &toy_train_config(200)).unwrap();
    assert!(*losses.last().unwrap() < 0.05, "{losses:?}");
    assert!(m.forward("harika", &vocab).unwrap() > 0.9);
    assert!(m.forward("berbat", &vocab).unwrap() < 0.1);
    assert_eq!(m.classify("harika", &vocab, 0.5).unwrap().0, Sentiment::Positive);
}

#[test]
fn contradictory_labels_keep_the_loss_at_ln2() {
    let vocab = common::toy_vocab();
    let mut m = SentimentModel::new(config(vocab.len(), 8), 1).unwrap();
    let data = labelled(&[("film", true), ("film", false), ("film", true), ("film", false)]);
    let losses = train_sentiment(&mut m, &data, &vocab, &toy_train_config(30)).unwrap();
    for l in &losses {
        assert!(*l >= std::f64::consts::LN_2 - 0.01, "{losses:?}");
    }
}

#[test]
fn one_epoch_does_not_raise_the_loss_on_average() {
    let vocab = common::toy_vocab();
    let data = labelled(&[("harika", true), ("berbat", false), ("çok güzel", true), ("çok kötü", false)]);
    let examples: Vec<SentimentExample> = data
        .iter()
        .map(|(t, l)| SentimentExample::encode(t, *l, &vocab).unwrap())
        .collect();
    let (mut before, mut after) = (0.0, 0.0);
    for seed in 0..3 {
        let mut m = SentimentModel::new(config(vocab.len(), 8), seed).unwrap();
        before += m.mean_loss(&examples).unwrap();
        m.fit(&examples, &toy_train_config(1), &mut |_, _| {}).unwrap();
        after += m.mean_loss(&examples).unwrap();
    }
    assert!(after <= before, "{after} > {before}");
}

#[test]
fn shuffled_corpus_still_overfits() {
    let vocab = common::toy_vocab();
    let mut data = labelled(&[("harika", true), ("berbat", false), ("bu film harika", true), ("bu film berbat", false)]);
    data.reverse();
    let mut m = SentimentModel::new(config(vocab.len(), 16), 0).unwrap();
    let losses = train_sentiment(&mut m, &data, &vocab, &toy_train_config(200)).unwrap();
    assert!(*losses.last().unwrap() < 0.05);
}

#[test]
fn full_stack_gradient_check() {
    let mut m = SentimentModel::new(
        SentimentConfig {
            subword_embed_dim: 2,
            rnn_hidden: 2,
            num_bigru_layers: 2,
            fc_units: 3,
            vocab_size: 6,
            max_tokens: 4,
        },
        2,
    )
    .unwrap();
    m.store.fill_uniform(1.0, &mut seeded_rng(12));
    let ex = SentimentExample {
        ids: vec![1, 4, 2, 5, 3],
        label: true,
    };
    let model = m.clone();
    let report = gradient_check(&mut m.store, |st| model.example_loss(st, &ex), 1e-5).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn zero_head_gives_one_half() {
    let vocab = common::toy_vocab();
    let mut m = SentimentModel::new(config(vocab.len(), 4), 0).unwrap();
    for id in [m.net.head.w, m.net.head.b] {
        m.store.get_mut(id).data.fill(0.0);
    }
    assert_eq!(m.forward("ne güzel bir gün", &vocab).unwrap(), 0.5);
    assert_eq!(m.classify("kötü", &vocab, 0.5).unwrap(), (Sentiment::Positive, 0.5));
    assert!(m.forward("   ", &vocab).is_err());
}

#[test]
fn empty_corpus_is_rejected() {
    let vocab = common::toy_vocab();
    let mut m = SentimentModel::new(config(vocab.len(), 4), 0).unwrap();
    assert!(train_sentiment(&mut m, &[], &vocab, &TrainConfig::default()).is_err());
}

#[test]
fn save_load_is_bitwise() {
    let vocab = common::toy_vocab();
    let mut m = SentimentModel::new(config(vocab.len(), 6), 3).unwrap();
    train_sentiment(&mut m, &labelled(&[("iyi", true), ("kötü", false)]), &vocab, &toy_train_config(2)).unwrap();
    let dir = common::temp_dir("sentiment");
    m.save(&dir).unwrap();
    let loaded = SentimentModel::load(&dir).unwrap();
    for t in ["iyi", "kötü", "bu film harika"] {
        assert_eq!(m.forward(t, &vocab).unwrap().to_bits(), loaded.forward(t, &vocab).unwrap().to_bits());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_is_open_unit_interval(ids in prop::collection::vec(4u32..30, 1..20), seed in 0u64..3) {
        let m = SentimentModel::new(config(30, 4), seed).unwrap();
        let p = m.probability(&ids).unwrap();
        prop_assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn decision_is_threshold_rule(p in 0.0f64..1.0, t in 0.0f64..1.0) {
        let want = if p >= t { Sentiment::Positive } else { Sentiment::Negative };
        prop_assert_eq!(decide(p, t), want);
    }
}

#[test]
fn decision_boundaries() {
    assert_eq!(decide(0.5, 0.5), Sentiment::Positive);
    assert_eq!(decide(0.8, 0.9), Sentiment::Negative);
}
