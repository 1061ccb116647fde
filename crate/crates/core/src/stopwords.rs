//! Stopword removal from a fixed lexicon, or from a per-corpus frequency
//! threshold found at the knee of the rank-frequency curve.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::normalizer::lower_case;

const SHIPPED: &str = include_str!("../assets/stopwords.txt");

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopwordLexicon {
    words: BTreeSet<String>,
}

impl StopwordLexicon {
    /// One word per line; entries are lowercased, blank lines skipped.
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let w = line.trim();
            if w.is_empty() {
                continue;
            }
            if w.chars().any(char::is_whitespace) {
                return Err(Error::parse(i + 1, format!("{w:?} is not a single word")));
            }
            words.insert(lower_case(w));
        }
        Ok(StopwordLexicon { words })
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// The Turkish list bundled with the library.
    pub fn shipped() -> Self {
        Self::load(SHIPPED.as_bytes()).expect("bundled stopword list parses")
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordLexicon {
            words: words
                .into_iter()
                .map(|w| lower_case(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn words(&self) -> &BTreeSet<String> {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Tokens whose lowercase form is not in the lexicon, in order.
pub fn remove_static<S: AsRef<str>>(tokens: &[S], lexicon: &StopwordLexicon) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !lexicon.contains(&lower_case(t)))
        .map(str::to_string)
        .collect()
}

/// Index of the point of a descending curve farthest from the chord joining
/// its endpoints, after scaling both axes to [0, 1]. Ties go to the smaller
/// index. `None` when the curve has fewer than three distinct values.
pub fn knee_index(desc: &[u64]) -> Option<usize> {
    let distinct: BTreeSet<u64> = desc.iter().copied().collect();
    if distinct.len() < 3 {
        return None;
    }
    let n1 = (desc.len() - 1) as i128;
    let hi = *distinct.last()? as i128;
    let lo = *distinct.first()? as i128;
    let span = hi - lo;
    // |x + y - 1| scaled by (n - 1) * span stays an exact integer.
    let mut best = (0usize, -1i128);
    for (i, f) in desc.iter().enumerate() {
        let d = (i as i128 * span + (*f as i128 - lo) * n1 - n1 * span).abs();
        if d > best.1 {
            best = (i, d);
        }
    }
    Some(best.0)
}

/// Words strictly more frequent than the word at the knee.
pub fn detect_dynamic_stopwords<S: AsRef<str>>(tokens: &[S]) -> Result<BTreeSet<String>> {
    if tokens.is_empty() {
        return Err(Error::input("cannot detect stopwords in an empty corpus"));
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut curve: Vec<u64> = counts.values().copied().collect();
    curve.sort_unstable_by(|a, b| b.cmp(a));
    let Some(k) = knee_index(&curve) else {
        return Ok(BTreeSet::new());
    };
    let threshold = curve[k];
    Ok(counts
        .into_iter()
        .filter(|(_, c)| *c > threshold)
        .map(|(w, _)| w.to_string())
        .collect())
}

/// Detect stopwords on this corpus and drop them. With `fold_case` the
/// detection runs on lowercased tokens.
pub fn remove_dynamic<S: AsRef<str>>(tokens: &[S], fold_case: bool) -> Result<Vec<String>> {
    if fold_case {
        let folded: Vec<String> = tokens.iter().map(|t| lower_case(t.as_ref())).collect();
        let lex = StopwordLexicon {
            words: detect_dynamic_stopwords(&folded)?,
        };
        Ok(remove_static(tokens, &lex))
    } else {
        let found = detect_dynamic_stopwords(tokens)?;
        Ok(tokens
            .iter()
            .map(AsRef::as_ref)
            .filter(|t| !found.contains(*t))
            .map(str::to_string)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(freqs: &[(&str, usize)]) -> Vec<String> {
        freqs
            .iter()
            .flat_map(|(w, n)| std::iter::repeat_n(w.to_string(), *n))
            .collect()
    }

    #[test]
    fn static_removal() {
        let lex = StopwordLexicon::from_words(["bu", "ve"]);
        assert_eq!(remove_static(&["bu", "kalem", "ve", "defter"], &lex), ["kalem", "defter"]);
        assert!(remove_static::<&str>(&[], &lex).is_empty());
        assert!(remove_static(&["VE"], &lex).is_empty());
        assert!(StopwordLexicon::shipped().len() >= 250);
    }

    #[test]
    fn knee_example() {
        let toks = corpus(&[("a", 100), ("b", 95), ("c", 5), ("d", 4), ("e", 3)]);
        let found = detect_dynamic_stopwords(&toks).unwrap();
        assert_eq!(found.into_iter().collect::<Vec<_>>(), ["a", "b"]);
    }

    #[test]
    fn degenerate_curves() {
        assert!(detect_dynamic_stopwords(&corpus(&[("a", 3), ("b", 3), ("c", 3)]))
            .unwrap()
            .is_empty());
        assert!(detect_dynamic_stopwords(&["x"]).unwrap().is_empty());
        assert!(detect_dynamic_stopwords::<&str>(&[]).is_err());
        assert_eq!(remove_dynamic(&["tek"], true).unwrap(), ["tek"]);
    }

    #[test]
    fn linear_curve_has_no_stopwords() {
        let toks = corpus(&[("a", 4), ("b", 3), ("c", 2), ("d", 1)]);
        assert!(detect_dynamic_stopwords(&toks).unwrap().is_empty());
    }
}
