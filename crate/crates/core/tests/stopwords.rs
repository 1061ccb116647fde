use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use tnlp::stopwords::{detect_dynamic_stopwords, knee_index, remove_dynamic, remove_static, StopwordLexicon};

fn corpus(freqs: &[(&str, usize)]) -> Vec<String> {
    freqs
        .iter()
        .flat_map(|(w, n)| std::iter::repeat_n(w.to_string(), *n))
        .collect()
}

/// Perpendicular distance of every point to the chord, in unit-square coordinates.
fn chord_distances(desc: &[u64]) -> Vec<f64> {
    let n1 = (desc.len() - 1) as f64;
    let hi = *desc.iter().max().unwrap() as f64;
    let lo = *desc.iter().min().unwrap() as f64;
    let (ax, ay, bx, by) = (0.0, 1.0, 1.0, 0.0);
    desc.iter()
        .enumerate()
        .map(|(i, f)| {
            let (px, py) = (i as f64 / n1, (*f as f64 - lo) / (hi - lo));
            ((bx - ax) * (ay - py) - (ax - px) * (by - ay)).abs() / f64::hypot(bx - ax, by - ay)
        })
        .collect()
}

fn is_subsequence(small: &[String], big: &[String]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

#[test]
fn knee_example() {
    let toks = corpus(&[("a", 100), ("b", 95), ("c", 5), ("d", 4), ("e", 3)]);
    let found: Vec<_> = detect_dynamic_stopwords(&toks).unwrap().into_iter().collect();
    assert_eq!(found, ["a", "b"]);
    assert_eq!(knee_index(&[100, 95, 5, 4, 3]), Some(2));
    let kept = remove_dynamic(&toks, false).unwrap();
    assert_eq!(kept.len(), 12);
}

#[test]
fn static_lexicon() {
    let lex = StopwordLexicon::shipped();
    for w in ["ve", "bir", "bu", "için", "ile", "de", "da"] {
        assert!(lex.contains(w), "{w}");
    }
    let toks = ["Bu", "kitap", "ve", "defter", "için"];
    assert_eq!(remove_static(&toks, &lex), ["kitap", "defter"]);
    let custom = StopwordLexicon::load("İÇİN\n\nama\n".as_bytes()).unwrap();
    assert!(custom.contains("için") && custom.len() == 2);
    assert!(StopwordLexicon::load("iki kelime\n".as_bytes()).is_err());
}

#[test]
fn case_folding_merges_counts() {
    let mut toks = corpus(&[("ve", 30), ("Ve", 30), ("kalem", 4), ("defter", 3), ("silgi", 2), ("masa", 1)]);
    toks.extend(corpus(&[("kitap", 3)]));
    let folded = remove_dynamic(&toks, true).unwrap();
    assert!(!folded.iter().any(|t| t == "ve" || t == "Ve"));
}

#[test]
fn zipf_injection_is_recovered() {
    let mut rng = StdRng::seed_from_u64(4);
    let content: Vec<String> = (0..400).map(|i| format!("kelime{i}")).collect();
    let weights: Vec<f64> = (1..=content.len()).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut toks = Vec::new();
    for _ in 0..20_000 {
        let mut u = rng.gen::<f64>() * total;
        let mut k = 0;
        while k + 1 < weights.len() && u > weights[k] {
            u -= weights[k];
            k += 1;
        }
        toks.push(content[k].clone());
    }
    let injected = ["ve", "bir", "bu", "da", "ile"];
    for w in injected {
        toks.extend(std::iter::repeat_n(w.to_string(), 15_000));
    }
    toks.shuffle(&mut rng);
    let found = detect_dynamic_stopwords(&toks).unwrap();
    for w in injected {
        assert!(found.contains(w), "{w} not detected in {found:?}");
    }
    // the knee also takes the head of the Zipf curve, never its tail
    assert!(found.len() <= 20, "{found:?}");
    assert!(found.iter().all(|w| !w.starts_with("kelime") || w["kelime".len()..].parse::<usize>().unwrap() < 20));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn knee_matches_exhaustive_distance(mut curve in prop::collection::vec(1u64..500, 1..40)) {
        curve.sort_unstable_by(|a, b| b.cmp(a));
        let distinct: BTreeSet<_> = curve.iter().collect();
        match knee_index(&curve) {
            None => prop_assert!(distinct.len() < 3),
            Some(k) => {
                let d = chord_distances(&curve);
                let best = d.iter().cloned().fold(f64::MIN, f64::max);
                prop_assert!((d[k] - best).abs() <= 1e-12);
                prop_assert!(d[..k].iter().all(|x| *x < best - 1e-12));
            }
        }
    }

    #[test]
    fn detection_ignores_token_order(freqs in prop::collection::vec(1usize..40, 1..12), seed: u64) {
        let names: Vec<String> = (0..freqs.len()).map(|i| format!("w{i}")).collect();
        let pairs: Vec<(&str, usize)> = names.iter().map(String::as_str).zip(freqs.iter().copied()).collect();
        let toks = corpus(&pairs);
        let mut shuffled = toks.clone();
        shuffled.shuffle(&mut StdRng::seed_from_u64(seed));
        prop_assert_eq!(detect_dynamic_stopwords(&toks).unwrap(), detect_dynamic_stopwords(&shuffled).unwrap());
    }

    #[test]
    fn stopwords_are_upward_closed(freqs in prop::collection::vec(1usize..60, 1..15)) {
        let names: Vec<String> = (0..freqs.len()).map(|i| format!("w{i}")).collect();
        let pairs: Vec<(&str, usize)> = names.iter().map(String::as_str).zip(freqs.iter().copied()).collect();
        let found = detect_dynamic_stopwords(&corpus(&pairs)).unwrap();
        for (w, f) in &pairs {
            if found.contains(*w) {
                for (v, g) in &pairs {
                    if g >= f {
                        prop_assert!(found.contains(*v));
                    }
                }
            }
        }
        prop_assert!(found.len() < pairs.len() || pairs.is_empty());
    }

    #[test]
    fn removal_keeps_a_subsequence(freqs in prop::collection::vec(1usize..30, 1..10), fold: bool, seed: u64) {
        let names: Vec<String> = (0..freqs.len()).map(|i| if i % 3 == 0 { format!("W{i}") } else { format!("w{i}") }).collect();
        let pairs: Vec<(&str, usize)> = names.iter().map(String::as_str).zip(freqs.iter().copied()).collect();
        let mut toks = corpus(&pairs);
        toks.shuffle(&mut StdRng::seed_from_u64(seed));
        let kept = remove_dynamic(&toks, fold).unwrap();
        prop_assert!(is_subsequence(&kept, &toks));
        let found = detect_dynamic_stopwords(&toks).unwrap();
        if !fold {
            prop_assert_eq!(kept.len(), toks.iter().filter(|t| !found.contains(*t)).count());
        }
    }
}
