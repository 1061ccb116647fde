//! Verbs over plain text: splitting, normalization, stopwords, subword
//! tokenization and spelling correction.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::json;
use tnlp::normalizer::{
    correct_spelling, deasciify, is_punctuation, lower_case, number_to_words, remove_accent_marks,
    remove_punctuation, DeasciiTable, FrequencyDictionary, SpellingConfig, SpellingModel, BACKOFF_ALPHA,
};
use tnlp::sentence_splitter::{split_sentences, AbbreviationLexicon};
use tnlp::stopwords::{detect_dynamic_stopwords, remove_static, StopwordLexicon};
use tnlp::unigram::{train_unigram, TrainerConfig, UnigramVocab};

use crate::{in_file, read_text, require_file, CliError, CliResult, Ctx, InputArg, NormalizeArgs, SpellArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Lower,
    NoPunct,
    NoAccents,
    Deascii,
    Num2Word,
    Spell,
}

fn tokens(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

pub fn split(ctx: &mut Ctx, abbrev: Option<&Path>, io: &InputArg) -> CliResult<()> {
    let lex = match abbrev {
        Some(p) => {
            require_file(p)?;
            in_file(p, AbbreviationLexicon::load_file(p))?
        }
        None => AbbreviationLexicon::shipped(),
    };
    let text = ctx.lines(io)?.join("\n");
    for s in split_sentences(&text, &lex) {
        ctx.out.emit(&s, || json!({ "sentence": s }))?;
    }
    Ok(())
}

/// Spell out a numeral token, keeping punctuation around it.
fn numeral_token(tok: &str) -> String {
    if let Ok(w) = number_to_words(tok) {
        return w;
    }
    let core = tok.trim_start_matches(['(', '[', '"', '\'']);
    let lead = &tok[..tok.len() - core.len()];
    let stripped = core.trim_end_matches(is_punctuation);
    let trail = &core[stripped.len()..];
    match number_to_words(stripped) {
        Ok(w) if !stripped.is_empty() => format!("{lead}{w}{trail}"),
        _ => tok.to_string(),
    }
}

fn load_dictionary(p: &Path) -> CliResult<FrequencyDictionary> {
    require_file(p)?;
    in_file(p, FrequencyDictionary::load_file(p))
}

pub fn normalize(ctx: &mut Ctx, args: &NormalizeArgs, steps: &[Step]) -> CliResult<()> {
    let table = steps.contains(&Step::Deascii).then(DeasciiTable::shipped);
    let speller = match &args.spell {
        Some(p) => Some(in_file(p, SpellingModel::from_dictionary(load_dictionary(p)?, BACKOFF_ALPHA))?),
        None => None,
    };
    for line in ctx.lines(&args.io)? {
        let mut s = line;
        for step in steps {
            s = match step {
                Step::Lower => lower_case(&s),
                Step::NoPunct => remove_punctuation(&s),
                Step::NoAccents => remove_accent_marks(&s),
                Step::Deascii => deasciify(&s, table.as_ref().expect("table loaded for deascii")),
                Step::Num2Word => tokens(&s).into_iter().map(numeral_token).collect::<Vec<_>>().join(" "),
                Step::Spell => {
                    let m = speller.as_ref().expect("speller loaded for spell");
                    correct_spelling(&tokens(&s), m, &SpellingConfig::default())?.join(" ")
                }
            };
        }
        ctx.out.emit(&s, || json!({ "text": s }))?;
    }
    Ok(())
}

pub fn stopwords(ctx: &mut Ctx, lexicon: Option<&Path>, dynamic: bool, fold_case: bool, io: &InputArg) -> CliResult<()> {
    let lines = ctx.lines(io)?;
    let lex = if dynamic {
        let all: Vec<String> = lines
            .iter()
            .flat_map(|l| tokens(l))
            .map(|t| if fold_case { lower_case(t) } else { t.to_string() })
            .collect();
        if all.is_empty() {
            return Ok(());
        }
        let found = detect_dynamic_stopwords(&all)?;
        if !fold_case {
            // exact-case matching: drop only tokens detected verbatim
            for l in &lines {
                let kept: Vec<&str> = tokens(l).into_iter().filter(|t| !found.contains(*t)).collect();
                let s = kept.join(" ");
                ctx.out.emit(&s, || json!({ "tokens": kept }))?;
            }
            return Ok(());
        }
        StopwordLexicon::from_words(found)
    } else {
        match lexicon {
            Some(p) => {
                require_file(p)?;
                in_file(p, StopwordLexicon::load_file(p))?
            }
            None => StopwordLexicon::shipped(),
        }
    };
    for l in &lines {
        let kept = remove_static(&tokens(l), &lex);
        let s = kept.join(" ");
        ctx.out.emit(&s, || json!({ "tokens": kept }))?;
    }
    Ok(())
}

pub fn tokenizer_train(ctx: &mut Ctx, size: usize, corpus: &Path, out: &Path) -> CliResult<()> {
    if size == 0 {
        return Err(CliError::Usage("--size must be at least 1".into()));
    }
    let text = read_text(corpus)?;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for w in text.split_whitespace() {
        *counts.entry(w).or_default() += 1;
    }
    let config = TrainerConfig {
        target_size: size,
        ..TrainerConfig::default()
    };
    let vocab = in_file(corpus, train_unigram(counts, &config))?;
    vocab.save(File::create(out)?)?;
    let n = vocab.len();
    ctx.out.emit(&format!("pieces {n}"), || json!({ "pieces": n }))
}

pub fn load_vocab(p: &Path) -> CliResult<UnigramVocab> {
    require_file(p)?;
    let f = File::open(p).map_err(|e| CliError::File {
        path: p.to_path_buf(),
        source: e.into(),
    })?;
    in_file(p, UnigramVocab::load(BufReader::new(f)))
}

pub fn tokenizer_encode(ctx: &mut Ctx, vocab: &Path, ids: bool, io: &InputArg) -> CliResult<()> {
    let vocab = load_vocab(vocab)?;
    for line in ctx.lines(io)? {
        let encoded = vocab.encode_text(&line);
        let pieces: Vec<Vec<String>> = encoded
            .iter()
            .map(|w| {
                w.iter()
                    .map(|id| if ids { id.to_string() } else { vocab.decode(&[*id]) })
                    .collect()
            })
            .collect();
        let s = pieces.iter().map(|w| w.join(" ")).collect::<Vec<_>>().join("\t");
        ctx.out.emit(&s, || if ids { json!({ "ids": encoded }) } else { json!({ "pieces": pieces }) })?;
    }
    Ok(())
}

pub fn spell(ctx: &mut Ctx, args: &SpellArgs) -> CliResult<()> {
    if !(1..=2).contains(&args.max_edit) {
        return Err(CliError::Usage("--max-edit must be 1 or 2".into()));
    }
    if args.margin.is_some_and(|m| !(m >= 1.0 && m.is_finite())) {
        return Err(CliError::Usage("--margin must be a finite factor of at least 1".into()));
    }
    let model = match (&args.dict, &args.corpus) {
        (Some(p), _) => in_file(p, SpellingModel::from_dictionary(load_dictionary(p)?, BACKOFF_ALPHA))?,
        (None, Some(p)) => {
            let text = read_text(p)?;
            in_file(p, SpellingModel::build(&tokens(&text), BACKOFF_ALPHA))?
        }
        (None, None) => return Err(CliError::Usage("one of --dict or --corpus is required".into())),
    };
    let config = SpellingConfig {
        max_edit: args.max_edit,
        margin: args.margin,
    };
    for line in ctx.lines(&args.io)? {
        let fixed = correct_spelling(&tokens(&line), &model, &config)?;
        let s = fixed.join(" ");
        ctx.out.emit(&s, || json!({ "tokens": fixed }))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::numeral_token;

    #[test]
    fn numerals_keep_surrounding_punctuation() {
        assert_eq!(numeral_token("12"), "on iki");
        assert_eq!(numeral_token("5."), "beş.");
        assert_eq!(numeral_token("(3,5)"), "(üç virgül beş)");
        assert_eq!(numeral_token("kalem"), "kalem");
        assert_eq!(numeral_token("..."), "...");
    }
}
