//! Spelling correction with a word-frequency dictionary and a stupid
//! backoff trigram model over the words around each position.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

pub const BACKOFF_ALPHA: f64 = 0.4;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyDictionary {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl FrequencyDictionary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut d = FrequencyDictionary::default();
        for t in tokens {
            d.add(t.as_ref(), 1);
        }
        d
    }

    pub fn add(&mut self, word: &str, count: u64) {
        if count > 0 {
            *self.counts.entry(word.to_string()).or_default() += count;
            self.total += count;
        }
    }

    /// Lines `word<TAB>count`; zero counts are dropped.
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut d = FrequencyDictionary::default();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(i + 1, "expected word<TAB>count"))?;
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::parse(i + 1, format!("invalid word {w:?}")));
            }
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad count {c:?}")))?;
            d.add(w, c);
        }
        Ok(d)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, c)| (w.as_str(), *c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpellingModel {
    pub dictionary: FrequencyDictionary,
    bigrams: HashMap<(String, String), u64>,
    trigrams: HashMap<(String, String, String), u64>,
    pub alpha: f64,
}

impl SpellingModel {
    /// Count unigrams, bigrams and trigrams of a token stream.
    pub fn build<S: AsRef<str>>(tokens: &[S], alpha: f64) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::input("cannot build a spelling model from an empty corpus"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Range(format!("backoff alpha {alpha} is not in (0, 1)")));
        }
        let toks: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        let dictionary = FrequencyDictionary::from_tokens(&toks);
        let mut bigrams = HashMap::new();
        let mut trigrams = HashMap::new();
        for w in toks.windows(2) {
            *bigrams.entry((w[0].to_string(), w[1].to_string())).or_default() += 1;
        }
        for w in toks.windows(3) {
            *trigrams
                .entry((w[0].to_string(), w[1].to_string(), w[2].to_string()))
                .or_default() += 1;
        }
        Ok(SpellingModel {
            dictionary,
            bigrams,
            trigrams,
            alpha,
        })
    }

    /// A unigram-only model over a frequency dictionary.
    pub fn from_dictionary(dictionary: FrequencyDictionary, alpha: f64) -> Result<Self> {
        if dictionary.is_empty() {
            return Err(Error::input("frequency dictionary is empty"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Range(format!("backoff alpha {alpha} is not in (0, 1)")));
        }
        Ok(SpellingModel {
            dictionary,
            bigrams: HashMap::new(),
            trigrams: HashMap::new(),
            alpha,
        })
    }

    pub fn unigram(&self, w: &str) -> u64 {
        self.dictionary.count(w)
    }

    pub fn bigram(&self, a: &str, b: &str) -> u64 {
        self.bigrams.get(&(a.to_string(), b.to_string())).copied().unwrap_or(0)
    }

    pub fn trigram(&self, a: &str, b: &str, c: &str) -> u64 {
        self.trigrams
            .get(&(a.to_string(), b.to_string(), c.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn bigram_count(&self) -> usize {
        self.bigrams.len()
    }

    pub fn trigram_count(&self) -> usize {
        self.trigrams.len()
    }

    /// Stupid-backoff score of `w` after `prev2 prev1`; either context word
    /// may be missing at a sentence start.
    pub fn score(&self, prev2: Option<&str>, prev1: Option<&str>, w: &str) -> f64 {
        let total = self.dictionary.total() as f64;
        let unigram = || {
            let c = self.unigram(w);
            if c > 0 {
                c as f64 / total
            } else {
                1.0 / total
            }
        };
        let bigram = |p1: &str| {
            let c = self.bigram(p1, w);
            if c > 0 {
                Some(c as f64 / self.unigram(p1) as f64)
            } else {
                None
            }
        };
        if let (Some(p2), Some(p1)) = (prev2, prev1) {
            let c = self.trigram(p2, p1, w);
            if c > 0 {
                return c as f64 / self.bigram(p2, p1) as f64;
            }
            if let Some(b) = bigram(p1) {
                return self.alpha * b;
            }
            return self.alpha * self.alpha * unigram();
        }
        if let Some(p1) = prev1 {
            if let Some(b) = bigram(p1) {
                return b;
            }
            return self.alpha * unigram();
        }
        unigram()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpellingConfig {
    pub max_edit: usize,
    /// Replace an in-dictionary word only when a candidate's window score is
    /// higher by this factor. `None` never replaces dictionary words.
    pub margin: Option<f64>,
}

impl Default for SpellingConfig {
    fn default() -> Self {
        SpellingConfig {
            max_edit: 2,
            margin: None,
        }
    }
}

/// Sum of log scores of the trigrams that include position `i`.
fn window_score(model: &SpellingModel, words: &[&str], i: usize) -> f64 {
    let mut s = 0.0;
    for j in i..(i + 3).min(words.len()) {
        let p1 = j.checked_sub(1).map(|k| words[k]);
        let p2 = j.checked_sub(2).map(|k| words[k]);
        s += model.score(p2, p1, words[j]).ln();
    }
    s
}

fn candidates<'a>(model: &'a SpellingModel, word: &str, max_edit: usize) -> Vec<(&'a str, usize)> {
    let len = word.chars().count();
    model
        .dictionary
        .iter()
        .filter(|(w, _)| w.chars().count().abs_diff(len) <= max_edit)
        .filter_map(|(w, _)| {
            let d = strsim::damerau_levenshtein(word, w);
            (d <= max_edit).then_some((w, d))
        })
        .collect()
}

/// Correct each word left to right, scoring candidates by the backoff
/// trigram windows around it (corrected words on the left, originals on
/// the right).
pub fn correct_spelling<S: AsRef<str>>(sentence: &[S], model: &SpellingModel, config: &SpellingConfig) -> Result<Vec<String>> {
    if !(1..=2).contains(&config.max_edit) {
        return Err(Error::Range(format!("max edit distance {} is not 1 or 2", config.max_edit)));
    }
    let mut words: Vec<String> = sentence.iter().map(|w| w.as_ref().to_string()).collect();
    for i in 0..words.len() {
        let original = words[i].clone();
        let known = model.dictionary.contains(&original);
        let threshold = match (known, config.margin) {
            (true, None) => continue,
            (true, Some(m)) => m.ln(),
            (false, _) => 0.0,
        };
        let mut view: Vec<&str> = words.iter().map(String::as_str).collect();
        let base = window_score(model, &view, i);
        // (score, distance, count) compared so that ties favour closer and
        // more frequent words; the scan order makes the choice deterministic.
        let mut best: Option<(f64, usize, u64, &str)> = None;
        for (cand, dist) in candidates(model, &original, config.max_edit) {
            if cand == original {
                continue;
            }
            view[i] = cand;
            let s = window_score(model, &view, i);
            let key = (s, dist, model.unigram(cand));
            let better = match best {
                None => true,
                Some((bs, bd, bc, _)) => s > bs || (s == bs && (dist < bd || (dist == bd && key.2 > bc))),
            };
            if better {
                best = Some((s, dist, key.2, cand));
            }
        }
        if let Some((s, _, _, cand)) = best {
            if s > base + threshold {
                words[i] = cand.to_string();
            }
        }
    }
    Ok(words)
}
