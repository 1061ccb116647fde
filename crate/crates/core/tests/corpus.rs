mod common;

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use tnlp::corpus::metrics::edit_distance;
use tnlp::corpus::{
    accuracy, f1_macro, las_uas, read_conllu, read_ner_io, read_sentiment_tsv, stratified_split, word_error_rate,
    SplitMix64,
};
use tnlp::tasks::dep::DepArc;
use tnlp::Error;

fn brute_f1(gold: &[u8], pred: &[u8]) -> f64 {
    let classes: BTreeSet<u8> = gold.iter().chain(pred).copied().collect();
    let mut sum = 0.0;
    for c in &classes {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for (g, p) in gold.iter().zip(pred) {
            match (g == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
                _ => {}
            }
        }
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        sum += if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
    }
    sum / classes.len() as f64
}

/// Edit distance by trying every edit at every step.
fn brute_edits(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len() + b.len();
    }
    if let Some(d) = memo.get(&(a.len(), b.len())) {
        return *d;
    }
    let sub = brute_edits(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
    let del = brute_edits(&a[1..], b, memo) + 1;
    let ins = brute_edits(a, &b[1..], memo) + 1;
    let d = sub.min(del).min(ins);
    memo.insert((a.len(), b.len()), d);
    d
}

fn arcs_strategy() -> impl Strategy<Value = (Vec<Vec<DepArc>>, Vec<Vec<DepArc>>)> {
    prop::collection::vec(1usize..6, 1..5).prop_flat_map(|lens| {
        let side = |lens: Vec<usize>| {
            lens.into_iter()
                .map(|n| prop::collection::vec((0..=n, 0usize..3).prop_map(|(head, label)| DepArc { head, label }), n))
                .collect::<Vec<_>>()
        };
        (side(lens.clone()), side(lens))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn f1_and_accuracy_match_brute_force(pairs in prop::collection::vec((0u8..5, 0u8..5), 1..30)) {
        let (gold, pred): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let f1 = f1_macro(&gold, &pred).unwrap();
        prop_assert!((f1 - brute_f1(&gold, &pred)).abs() <= 1e-12);
        let acc = accuracy(&gold, &pred).unwrap();
        let hits = gold.iter().zip(&pred).filter(|(g, p)| g == p).count();
        prop_assert!((acc - hits as f64 / gold.len() as f64).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&acc));
        prop_assert_eq!(f1_macro(&gold, &gold).unwrap(), 1.0);
    }

    #[test]
    fn wer_matches_brute_force(r in prop::collection::vec(0u8..4, 1..8), h in prop::collection::vec(0u8..4, 0..8)) {
        let d = brute_edits(&r, &h, &mut HashMap::new());
        prop_assert_eq!(edit_distance(&r, &h), d);
        prop_assert_eq!(edit_distance(&h, &r), d);
        let wer = word_error_rate(&r, &h).unwrap();
        prop_assert!((wer - d as f64 / r.len() as f64).abs() <= 1e-12);
    }

    #[test]
    fn attachment_scores_match_counting((gold, pred) in arcs_strategy()) {
        let (las, uas) = las_uas(&gold, &pred).unwrap();
        let (mut n, mut head, mut both) = (0.0, 0.0, 0.0);
        for (g, p) in gold.iter().flatten().zip(pred.iter().flatten()) {
            n += 1.0;
            if g.head == p.head {
                head += 1.0;
                if g.label == p.label {
                    both += 1.0;
                }
            }
        }
        prop_assert!((uas - head / n).abs() <= 1e-12);
        prop_assert!((las - both / n).abs() <= 1e-12);
        prop_assert!(las <= uas);
    }

    #[test]
    fn stratified_split_partitions(labels in prop::collection::vec(0u8..4, 2..80), frac in 0.05f64..0.95, seed: u64) {
        let mut counts = HashMap::new();
        for l in &labels {
            *counts.entry(*l).or_insert(0usize) += 1;
        }
        let result = stratified_split(&labels, frac, seed);
        if counts.values().any(|c| *c < 2) {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let (train, test) = result.unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (class, size) in &counts {
            let k = test.iter().filter(|i| labels[**i] == *class).count();
            prop_assert!((k as f64 - *size as f64 * frac).abs() <= 1.0);
        }
        prop_assert_eq!(stratified_split(&labels, frac, seed).unwrap(), (train, test));
    }
}

#[test]
fn metric_examples() {
    assert!((accuracy(&[1, 1, 0], &[1, 0, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
    assert_eq!(f1_macro(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), 0.5);
    // class 2 is only predicted: its F1 is zero
    assert!((f1_macro(&[0, 0], &[0, 2]).unwrap() - (2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert!(accuracy::<u8>(&[1], &[]).is_err());

    let a = |head, label| DepArc { head, label };
    let gold = vec![vec![a(2, 0), a(0, 1)], vec![a(0, 1), a(1, 2)]];
    let pred = vec![vec![a(2, 0), a(0, 2)], vec![a(0, 1), a(0, 2)]];
    assert_eq!(las_uas(&gold, &pred).unwrap(), (0.5, 0.75));
    let relabelled = vec![vec![a(2, 1), a(0, 0)], vec![a(0, 0), a(1, 0)]];
    assert_eq!(las_uas(&gold, &relabelled).unwrap(), (0.0, 1.0));

    let w = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    assert!((word_error_rate(&w("a b c"), &w("a x c")).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(word_error_rate(&w("a b"), &w("a b c")).unwrap(), 0.5);
    assert!(word_error_rate::<String>(&[], &w("a")).is_err());
}

#[test]
fn split_examples() {
    let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
    let (train, test) = stratified_split(&labels, 0.10, 0).unwrap();
    assert_eq!((train.len(), test.len()), (90, 10));
    assert_eq!(test.iter().filter(|i| labels[**i] == 0).count(), 5);
    let (_, test) = stratified_split(&["a", "a", "b", "b"], 0.5, 7).unwrap();
    assert_eq!(test.len(), 2);
    assert!(stratified_split(&["a", "a", "b"], 0.5, 0).is_err());
    assert!(stratified_split(&["a", "a"], 1.0, 0).is_err());
}

#[test]
fn splitmix_reference_stream() {
    let mut r = SplitMix64::new(0);
    assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
    assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
}

#[test]
fn toy_corpora_parse() {
    let tb = read_conllu(common::toy_text("treebank.conllu").as_bytes()).unwrap();
    assert!(!tb.is_empty() && tb.len() <= 20);
    for s in &tb {
        assert!(s.heads.iter().all(|h| *h <= s.len()));
        assert_eq!(s.forms.len(), s.deprels.len());
    }
    let ner = read_ner_io(common::toy_text("ner.tsv").as_bytes()).unwrap();
    assert_eq!(ner[0].1.len(), ner[0].0.len());
    let senti = read_sentiment_tsv(common::toy_text("sentiment.tsv").as_bytes()).unwrap();
    assert_eq!(senti[0], ("harika".to_string(), true));
}

#[test]
fn ner_reader_rules() {
    let ok = read_ner_io("Ahmet\tPER\nAnkara\tLOC\ngeldi\tO\n\n\n".as_bytes()).unwrap();
    assert_eq!(ok.len(), 1);
    assert_eq!(ok[0].1, ["PER", "LOC", "O"]);
    let bad = read_ner_io("Ahmet\tB-PER\n".as_bytes());
    assert!(matches!(bad, Err(Error::Data { line: Some(1), .. })));
}

#[test]
fn conllu_skips_ranges_and_strips_subtypes() {
    let text = "1\tgittim\tgit\tVERB\t_\t_\t0\troot\t_\t_\n\
                2-3\tevdeki\t_\t_\t_\t_\t_\t_\t_\t_\n\
                2\tev\tev\tNOUN\t_\t_\t1\tobl:tmod\t_\t_\n\
                3\tki\tki\tADP\t_\t_\t2\tcase\t_\t_\n";
    let s = read_conllu(text.as_bytes()).unwrap();
    assert_eq!(s[0].forms, ["gittim", "ev", "ki"]);
    assert_eq!(s[0].deprels, ["root", "obl", "case"]);
}
