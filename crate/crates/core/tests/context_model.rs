mod common;

use proptest::prelude::*;
use tnlp::context_model::{ContextModel, ContextModelConfig, TaggedSentence};
use tnlp::neural::{gradient_check, seeded_rng, ParamStore};
use tnlp::pipeline::{prepare, toy_train_config, Prepared, Task};
use tnlp::tasks::morph::LexiconAnalyzer;

fn unit_config(num_tags: usize, vocab: usize) -> ContextModelConfig {
    ContextModelConfig {
        subword_embed_dim: 1,
        word_rnn_hidden: 1,
        left_ctx_hidden: 1,
        right_ctx_hidden: 1,
        tag_embed_dim: 1,
        tag_rnn_hidden: 1,
        fc1_units: 1,
        fc2_units: 1,
        num_tags,
        max_left_words: 40,
        max_right_words: 40,
        vocab_size: vocab,
    }
}

fn small_config(num_tags: usize, vocab: usize) -> ContextModelConfig {
    ContextModelConfig {
        subword_embed_dim: 4,
        word_rnn_hidden: 4,
        left_ctx_hidden: 3,
        right_ctx_hidden: 3,
        tag_embed_dim: 2,
        tag_rnn_hidden: 2,
        fc1_units: 5,
        fc2_units: 4,
        num_tags,
        max_left_words: 40,
        max_right_words: 40,
        vocab_size: vocab,
    }
}

fn p(store: &ParamStore, name: &str) -> Vec<f64> {
    store.get(store.id(name).unwrap()).data.clone()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar GRU step read straight from the named tensors.
fn gru1(store: &ParamStore, prefix: &str, h: f64, x: f64) -> f64 {
    let q = |n: &str| p(store, &format!("{prefix}.{n}"))[0];
    let z = sig(q("w_z") * x + q("u_z") * h + q("b_z"));
    let r = sig(q("w_r") * x + q("u_r") * h + q("b_r"));
    let c = (q("w_h") * x + q("u_h") * (r * h) + q("b_h")).tanh();
    (1.0 - z) * h + z * c
}

/// Every scalar gets its own distinct value so swapped wiring shows up.
fn distinct_values(store: &mut ParamStore) {
    let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    let mut k = 0.0;
    for id in ids {
        for v in store.get_mut(id).data.iter_mut() {
            k += 1.0;
            *v = 0.9 * (k * 0.7f64).sin();
        }
    }
}

#[test]
fn two_word_trace_matches_hand_evaluation() {
    let mut m = ContextModel::new(unit_config(2, 4), 0).unwrap();
    distinct_values(&mut m.store);
    let s = &m.store;
    let e = |id: usize| p(s, "subword_embedding")[id];
    let sentence = vec![vec![1u32, 2], vec![3u32]];
    let wv0 = gru1(s, "word_rnn", gru1(s, "word_rnn", 0.0, e(1)), e(2));
    let wv1 = gru1(s, "word_rnn", 0.0, e(3));
    let head = |fused: [f64; 4]| -> Vec<f64> {
        let w1 = p(s, "fc1.w");
        let h1 = (w1.iter().zip(fused).map(|(a, b)| a * b).sum::<f64>() + p(s, "fc1.b")[0]).tanh();
        let h2 = (p(s, "fc2.w")[0] * h1 + p(s, "fc2.b")[0]).tanh();
        let (hw, hb) = (p(s, "head.w"), p(s, "head.b"));
        vec![hw[0] * h2 + hb[0], hw[1] * h2 + hb[1]]
    };

    // position 0: no left words, no history, right context is word 1
    let expect0 = head([wv0, 0.0, gru1(s, "right_ctx_rnn", 0.0, wv1), 0.0]);
    // position 1 after tag 1: left context is word 0, nothing on the right
    let tag = gru1(s, "tag_rnn", 0.0, p(s, "tag_embedding")[1]);
    let expect1 = head([wv1, gru1(s, "left_ctx_rnn", 0.0, wv0), 0.0, tag]);

    let got0 = m.forward_word(&sentence, 0, &[]).unwrap();
    let got1 = m.forward_word(&sentence, 1, &[1]).unwrap();
    for (a, b) in got0.iter().zip(&expect0).chain(got1.iter().zip(&expect1)) {
        assert!((a - b).abs() < 1e-12, "{got0:?} {expect0:?} / {got1:?} {expect1:?}");
    }
}

#[test]
fn right_context_is_folded_right_to_left() {
    let mut m = ContextModel::new(unit_config(2, 4), 3).unwrap();
    distinct_values(&mut m.store);
    let s = &m.store;
    let e = p(s, "subword_embedding");
    let w = |id: usize| gru1(s, "word_rnn", 0.0, e[id]);
    let r = gru1(s, "right_ctx_rnn", gru1(s, "right_ctx_rnn", 0.0, w(3)), w(2));
    let fused = [w(1), 0.0, r, 0.0];
    let h1 = (p(s, "fc1.w").iter().zip(fused).map(|(a, b)| a * b).sum::<f64>() + p(s, "fc1.b")[0]).tanh();
    let h2 = (p(s, "fc2.w")[0] * h1 + p(s, "fc2.b")[0]).tanh();
    let got = m.forward_word(&[vec![1], vec![2], vec![3]], 0, &[]).unwrap();
    let (hw, hb) = (p(s, "head.w"), p(s, "head.b"));
    assert!((got[0] - (hw[0] * h2 + hb[0])).abs() < 1e-12);
}

#[test]
fn context_caps_limit_the_window() {
    let mut config = small_config(3, 10);
    config.max_left_words = 1;
    config.max_right_words = 1;
    let m = ContextModel::new(config, 4).unwrap();
    let a: Vec<Vec<u32>> = vec![vec![4], vec![5], vec![6], vec![7], vec![8]];
    let mut b = a.clone();
    b[0] = vec![9];
    b[4] = vec![1, 2];
    // position 2 only sees words 1..=3 and the most recent tag
    assert_eq!(m.forward_word(&a, 2, &[0, 1]).unwrap(), m.forward_word(&b, 2, &[2, 1]).unwrap());
    assert_ne!(m.forward_word(&a, 2, &[0, 1]).unwrap(), m.forward_word(&a, 2, &[0, 2]).unwrap());
}

fn checked_sentence() -> TaggedSentence {
    TaggedSentence::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![vec![1, 2], vec![3], vec![4, 5, 6]],
        vec![2, 0, 1],
    )
    .unwrap()
}

#[test]
fn gradient_check_small_model() {
    let mut m = ContextModel::new(small_config(3, 8), 0).unwrap();
    m.store.fill_uniform(1.0, &mut seeded_rng(100));
    let s = checked_sentence();
    let model = m.clone();
    let report = gradient_check(&mut m.store, |st| model.sentence_loss(st, &s), 1e-5).unwrap();
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

/// Across many random instances the only disagreements are at the
/// finite-difference noise floor: relative to max(|a|, |n|, 1e-6) every
/// coordinate agrees.
#[test]
fn gradients_agree_across_seeds_above_the_noise_floor() {
    let s = checked_sentence();
    for seed in 0..20 {
        let mut m = ContextModel::new(small_config(3, 8), seed).unwrap();
        m.store.fill_uniform(1.0, &mut seeded_rng(seed + 100));
        let model = m.clone();
        let (_, grads) = model.sentence_loss(&m.store, &s).unwrap();
        let ids: Vec<_> = m.store.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            for i in 0..m.store.get(id).len() {
                let orig = m.store.get(id).data[i];
                m.store.get_mut(id).data[i] = orig + 1e-5;
                let plus = model.sentence_loss(&m.store, &s).unwrap().0;
                m.store.get_mut(id).data[i] = orig - 1e-5;
                let minus = model.sentence_loss(&m.store, &s).unwrap().0;
                m.store.get_mut(id).data[i] = orig;
                let n = (plus - minus) / 2e-5;
                let a = grads.at(id, i);
                assert!((a - n).abs() / a.abs().max(n.abs()).max(1e-6) < 1e-4, "seed {seed}: {a} vs {n}");
            }
        }
    }
}

#[test]
fn first_epoch_lowers_the_loss_on_average() {
    let vocab = common::toy_vocab();
    let data = common::toy_dataset(Task::Ner);
    let Prepared::Tagged(_, corpus) = prepare(&data, &vocab, &LexiconAnalyzer::shipped(), &[]).unwrap() else {
        unreachable!()
    };
    let corpus = &corpus[..5];
    let mut before = 0.0;
    let mut after = 0.0;
    for seed in 0..3 {
        let mut m = ContextModel::new(small_config(4, vocab.len()), seed).unwrap();
        before += m.mean_loss(corpus).unwrap();
        m.fit(corpus, &toy_train_config(1), &mut |_, _| {}).unwrap();
        after += m.mean_loss(corpus).unwrap();
    }
    assert!(after <= before, "{after} > {before}");
}

#[test]
fn tag_of_a_word_can_depend_on_the_next_word() {
    // The first word is identical everywhere; only its right neighbour
    // tells the tags apart.
    let corpus: Vec<TaggedSentence> = [(vec![1u32], 0usize), (vec![2u32], 1usize)]
        .iter()
        .flat_map(|(next, tag)| {
            (0..3).map(move |_| {
                TaggedSentence::new(vec!["x".into(), "y".into()], vec![vec![5], next.clone()], vec![*tag, 2]).unwrap()
            })
        })
        .collect();
    let mut m = ContextModel::new(small_config(3, 8), 1).unwrap();
    m.fit(&corpus, &toy_train_config(60), &mut |_, _| {}).unwrap();
    assert_eq!(m.tag_sentence(&[vec![5], vec![1]]).unwrap(), vec![0, 2]);
    assert_eq!(m.tag_sentence(&[vec![5], vec![2]]).unwrap(), vec![1, 2]);
}

#[test]
fn save_load_predicts_bitwise_identically() {
    let vocab = common::toy_vocab();
    let data = common::toy_dataset(Task::Pos);
    let Prepared::Tagged(_, corpus) = prepare(&data, &vocab, &LexiconAnalyzer::shipped(), &[]).unwrap() else {
        unreachable!()
    };
    let mut m = ContextModel::new(small_config(17, vocab.len()), 5).unwrap();
    m.fit(&corpus, &toy_train_config(3), &mut |_, _| {}).unwrap();
    let dir = common::temp_dir("ctx-persist");
    m.save(&dir, "pos", &[]).unwrap();
    let (loaded, manifest) = ContextModel::load(&dir, "pos").unwrap();
    assert_eq!(manifest.kind, "pos");
    assert_eq!(loaded.config, m.config);
    for s in &corpus {
        let a = m.teacher_forced_logits(&s.subword_ids, &s.tags).unwrap();
        let b = loaded.teacher_forced_logits(&s.subword_ids, &s.tags).unwrap();
        let bits = |v: &Vec<Vec<f64>>| v.concat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
    assert!(ContextModel::load(&dir, "ner").is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

fn sentence_strategy() -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(4u32..12, 1..4), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn one_tag_per_word(sentence in sentence_strategy(), seed in 0u64..4) {
        let m = ContextModel::new(small_config(3, 12), seed).unwrap();
        prop_assert_eq!(m.tag_sentence(&sentence).unwrap().len(), sentence.len());
    }

    #[test]
    fn later_tags_never_change_earlier_outputs(
        sentence in sentence_strategy(),
        tags in prop::collection::vec(0usize..3, 12),
        flips in prop::collection::vec(0usize..3, 12),
        cut in 0usize..12,
    ) {
        let m = ContextModel::new(small_config(3, 12), 7).unwrap();
        let n = sentence.len();
        let cut = cut % n;
        let a: Vec<usize> = tags[..n].to_vec();
        let mut b = a.clone();
        b[cut..].copy_from_slice(&flips[cut..n]);
        let la = m.teacher_forced_logits(&sentence, &a).unwrap();
        let lb = m.teacher_forced_logits(&sentence, &b).unwrap();
        prop_assert_eq!(&la[..=cut], &lb[..=cut]);
    }

    #[test]
    fn greedy_decode_matches_its_own_teacher_forced_argmax(sentence in sentence_strategy()) {
        let m = ContextModel::new(small_config(3, 12), 9).unwrap();
        let tags = m.tag_sentence(&sentence).unwrap();
        let logits = m.teacher_forced_logits(&sentence, &tags).unwrap();
        for (l, t) in logits.iter().zip(&tags) {
            prop_assert_eq!(tnlp::neural::argmax(l), *t);
        }
    }
}
