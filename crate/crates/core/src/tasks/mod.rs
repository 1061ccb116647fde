//! Task heads built on the context model: named entities, part of speech,
//! morphological disambiguation and dependency parsing.

pub mod dep;
pub mod morph;

use crate::context_model::ContextModel;
use crate::error::{Error, Result};
use crate::unigram::UnigramVocab;

/// A closed, ordered tag inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagSet {
    names: &'static [&'static str],
}

/// Named-entity tags in IO format.
pub const NER_TAGS: TagSet = TagSet {
    names: &["O", "PER", "LOC", "ORG"],
};

/// Universal part-of-speech tags, alphabetical.
pub const POS_TAGS: TagSet = TagSet {
    names: &[
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN", "PUNCT",
        "SCONJ", "SYM", "VERB", "X",
    ],
};

impl TagSet {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &'static [&'static str] {
        self.names
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| *n == name)
    }

    pub fn name(&self, id: usize) -> Option<&'static str> {
        self.names.get(id).copied()
    }

    /// Id of `name`, or a data error naming the offending line.
    pub fn require(&self, name: &str, line: Option<usize>) -> Result<usize> {
        self.id(name)
            .ok_or_else(|| Error::data(line, format!("unknown tag {name:?}")))
    }
}

/// Subword ids for each word; every word must be non-empty.
pub fn encode_words<S: AsRef<str>>(vocab: &UnigramVocab, words: &[S]) -> Result<Vec<Vec<u32>>> {
    if words.is_empty() {
        return Err(Error::input("empty sentence"));
    }
    words
        .iter()
        .map(|w| {
            let w = w.as_ref();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::input(format!("{w:?} is not a single word")));
            }
            Ok(vocab.encode_word(w))
        })
        .collect()
}

fn tag_with<S: AsRef<str>>(
    model: &ContextModel,
    tags: TagSet,
    words: &[S],
    vocab: &UnigramVocab,
) -> Result<Vec<(String, &'static str)>> {
    if model.config.num_tags != tags.len() {
        return Err(Error::config(format!(
            "model has {} output tags, tag set has {}",
            model.config.num_tags,
            tags.len()
        )));
    }
    let ids = model.tag_sentence(&encode_words(vocab, words)?)?;
    Ok(words
        .iter()
        .zip(ids)
        .map(|(w, t)| (w.as_ref().to_string(), tags.names[t]))
        .collect())
}

pub fn ner_tag<S: AsRef<str>>(
    model: &ContextModel,
    words: &[S],
    vocab: &UnigramVocab,
) -> Result<Vec<(String, &'static str)>> {
    tag_with(model, NER_TAGS, words, vocab)
}

pub fn pos_tag<S: AsRef<str>>(
    model: &ContextModel,
    words: &[S],
    vocab: &UnigramVocab,
) -> Result<Vec<(String, &'static str)>> {
    tag_with(model, POS_TAGS, words, vocab)
}
