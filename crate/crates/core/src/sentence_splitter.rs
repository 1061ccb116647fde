//! Rule-based sentence boundary detection with a non-breaking prefix
//! lexicon. Boundaries are only placed at whitespace.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

pub const NUMERIC_ONLY_MARKER: &str = "#NUMERIC_ONLY#";

const SHIPPED: &str = include_str!("../assets/abbreviations.txt");

/// Prefixes whose trailing period does not end a sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbbreviationLexicon {
    entries: BTreeSet<String>,
    numeric_only: BTreeSet<String>,
}

impl AbbreviationLexicon {
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut lex = AbbreviationLexicon::default();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (entry, numeric) = match line.strip_suffix(NUMERIC_ONLY_MARKER) {
                Some(rest) => (rest.trim(), true),
                None => (line, false),
            };
            if entry.is_empty() || entry.chars().any(char::is_whitespace) || entry.ends_with('.') {
                return Err(Error::parse(i + 1, format!("invalid prefix {entry:?}")));
            }
            lex.insert(entry, numeric);
        }
        Ok(lex)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// The Turkish lexicon bundled with the library.
    pub fn shipped() -> Self {
        Self::load(SHIPPED.as_bytes()).expect("bundled abbreviation list parses")
    }

    pub fn insert(&mut self, prefix: &str, numeric_only: bool) {
        self.entries.insert(prefix.to_string());
        if numeric_only {
            self.numeric_only.insert(prefix.to_string());
        } else {
            self.numeric_only.remove(prefix);
        }
    }

    pub fn contains(&self, prefix: &str) -> bool {
        self.entries.contains(prefix)
    }

    pub fn is_numeric_only(&self, prefix: &str) -> bool {
        self.numeric_only.contains(prefix)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '‘' | '(' | '[' | '{' | '«')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']' | '}' | '»')
}

enum Ending<'a> {
    None,
    /// `!`, `?`, `…` or a run of two or more periods.
    Strong,
    /// A single period; holds the text before it.
    Period(&'a str),
}

fn ending(token: &str) -> Ending<'_> {
    let core = token.trim_end_matches(is_closer);
    if core.ends_with(['!', '?', '…']) || core.ends_with("..") {
        Ending::Strong
    } else if let Some(prefix) = core.strip_suffix('.') {
        Ending::Period(prefix)
    } else {
        Ending::None
    }
}

fn is_dotted_acronym(p: &str) -> bool {
    p.contains('.')
        && p.split('.').all(|seg| {
            let mut cs = seg.chars();
            matches!((cs.next(), cs.next()), (Some(c), None) if c.is_alphabetic())
        })
}

/// Whether a sentence ends between `token` and `next`.
fn boundary_after(token: &str, next: &str, lex: &AbbreviationLexicon) -> bool {
    let end = ending(token);
    if matches!(end, Ending::None) {
        return false;
    }
    let next_start = next.trim_start_matches(is_opener).chars().next();
    if next_start.is_some_and(char::is_lowercase) {
        return false;
    }
    let prefix = match end {
        Ending::Period(p) => p.trim_start_matches(is_opener),
        _ => return true,
    };
    if prefix.is_empty() {
        return true;
    }
    if prefix.chars().all(|c| c.is_ascii_digit()) {
        return false;
    }
    if lex.contains(prefix) {
        return lex.is_numeric_only(prefix) && !next_start.is_some_and(|c| c.is_ascii_digit());
    }
    !is_dotted_acronym(prefix)
}

/// Split `text` into sentences; whitespace inside a sentence collapses to
/// single spaces.
pub fn split_sentences(text: &str, lex: &AbbreviationLexicon) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        let last = i + 1 == tokens.len();
        if last || boundary_after(tokens[i], tokens[i + 1], lex) {
            out.push(tokens[start..=i].join(" "));
            start = i + 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_parsing() {
        let lex = AbbreviationLexicon::load("Dr\nNo #NUMERIC_ONLY#\n".as_bytes()).unwrap();
        assert!(lex.contains("Dr") && !lex.is_numeric_only("Dr"));
        assert!(lex.is_numeric_only("No"));
        assert!(AbbreviationLexicon::load("".as_bytes()).unwrap().is_empty());
        let lex = AbbreviationLexicon::load("# comment\nProf\n".as_bytes()).unwrap();
        assert_eq!(lex.len(), 1);
        assert!(matches!(
            AbbreviationLexicon::load("Dr\nbad entry\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(AbbreviationLexicon::load("vb.\n".as_bytes()).is_err());
    }

    #[test]
    fn shipped_lexicon_size() {
        let lex = AbbreviationLexicon::shipped();
        assert!(lex.len() >= 100);
        assert!(lex.contains("Dr") && lex.contains("Ç") && lex.is_numeric_only("No"));
    }

    #[test]
    fn basic_examples() {
        let lex = AbbreviationLexicon::shipped();
        assert_eq!(
            split_sentences("Bugün hava güzel. Yarın yağmur var.", &lex),
            ["Bugün hava güzel.", "Yarın yağmur var."]
        );
        assert_eq!(split_sentences("Dr. Ahmet geldi.", &lex), ["Dr. Ahmet geldi."]);
        assert_eq!(split_sentences("Fiyat 3.5 lira oldu.", &lex), ["Fiyat 3.5 lira oldu."]);
        assert!(split_sentences("", &lex).is_empty());
        assert!(split_sentences(" \n\t ", &lex).is_empty());
    }
}
