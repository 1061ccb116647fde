use proptest::prelude::*;
use tnlp::sentence_splitter::{split_sentences, AbbreviationLexicon};

const GOLDEN: &str = include_str!("../../../data/golden/sentences.tsv");

fn golden_cases() -> Vec<(&'static str, Vec<&'static str>)> {
    GOLDEN
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut fields = l.split('\t');
            let input = fields.next().unwrap();
            (input, fields.collect())
        })
        .collect()
}

#[test]
fn golden_suite() {
    let lex = AbbreviationLexicon::shipped();
    let cases = golden_cases();
    assert!(cases.len() >= 50);
    let failures: Vec<_> = cases
        .iter()
        .filter(|(input, want)| split_sentences(input, &lex) != *want)
        .map(|(input, _)| (*input, split_sentences(input, &lex)))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn empty_and_blank_input() {
    let lex = AbbreviationLexicon::shipped();
    assert!(split_sentences("", &lex).is_empty());
    assert!(split_sentences("\n\n  \t", &lex).is_empty());
    assert_eq!(split_sentences("\nBir.\n\nİki.\n", &lex), ["Bir.", "İki."]);
}

#[test]
fn custom_lexicon_changes_decisions() {
    let empty = AbbreviationLexicon::default();
    assert_eq!(split_sentences("Dr. Ahmet geldi.", &empty), ["Dr.", "Ahmet geldi."]);
    let mut lex = AbbreviationLexicon::default();
    lex.insert("Sn", false);
    assert_eq!(split_sentences("Sn. Kaya geldi.", &lex), ["Sn. Kaya geldi."]);
    lex.insert("Sn", true);
    assert_eq!(split_sentences("Sn. Kaya geldi.", &lex), ["Sn.", "Kaya geldi."]);
    assert_eq!(split_sentences("Sn. 4 geldi.", &lex), ["Sn. 4 geldi."]);
}

const VOCAB: &[&str] = &[
    "ev", "Ali", "geldi.", "Dr.", "3.", "3.5", "No.", "5", "gitti!", "ne?", "Bekle...", "A.B.", "\"Evet.\"", "(bu)", "«Son.»",
    "yarın", "İzmir.", "vb.", "…", "Tamam", "12.05.1990.", "TL.", "'Gel.'", "Prof.",
];

fn text_strategy() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(prop::sample::select(VOCAB), 0..25),
        prop::collection::vec(prop::sample::select(&[" ", "  ", "\n", "\t "][..]), 25),
    )
        .prop_map(|(words, gaps)| {
            let mut s = String::new();
            for (w, g) in words.iter().zip(&gaps) {
                s.push_str(w);
                s.push_str(g);
            }
            s
        })
}

fn ends_with_terminator(sentence: &str) -> bool {
    let closers: &[char] = &['"', '\'', '”', '’', ')', ']', '}', '»'];
    sentence.trim_end_matches(closers).ends_with(['.', '!', '?', '…'])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn splitting_conserves_tokens(text in text_strategy()) {
        let lex = AbbreviationLexicon::shipped();
        let out = split_sentences(&text, &lex);
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        prop_assert_eq!(out.join(" "), normalized);
        prop_assert!(out.iter().all(|s| !s.is_empty() && s.trim() == s));
    }

    #[test]
    fn splitting_is_idempotent(text in text_strategy()) {
        let lex = AbbreviationLexicon::shipped();
        let out = split_sentences(&text, &lex);
        for s in &out {
            prop_assert_eq!(split_sentences(s, &lex), vec![s.clone()]);
        }
        prop_assert_eq!(split_sentences(&out.join("\n"), &lex), out);
    }

    #[test]
    fn boundaries_follow_terminators(text in text_strategy()) {
        let lex = AbbreviationLexicon::shipped();
        let out = split_sentences(&text, &lex);
        if let Some((_, inner)) = out.split_last() {
            for s in inner {
                prop_assert!(ends_with_terminator(s), "{s:?}");
            }
        }
    }
}
