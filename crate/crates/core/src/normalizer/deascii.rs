//! Restore Turkish letters in text typed on an ASCII keyboard, using a
//! table of context patterns around each ambiguous letter.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: usize = 5;
const WORD_START: char = '^';
const WORD_END: char = '$';
const SLOT: char = '_';

const SHIPPED_TABLE: &str = include_str!("../../assets/deascii.tsv");
/// Word list the shipped table was learned from.
pub const SHIPPED_WORDS: &str = include_str!("../../assets/turkish_words.txt");

/// The accented counterpart of an ASCII candidate letter.
fn accented(c: char) -> Option<char> {
    Some(match c {
        'c' => 'ç',
        'g' => 'ğ',
        'i' => 'ı',
        'o' => 'ö',
        's' => 'ş',
        'u' => 'ü',
        'C' => 'Ç',
        'G' => 'Ğ',
        'I' => 'İ',
        'O' => 'Ö',
        'S' => 'Ş',
        'U' => 'Ü',
        _ => return None,
    })
}

/// Lowercase ASCII skeleton of a letter; `ı`, `I`, `İ` all fold to `i`.
fn fold(c: char) -> char {
    match c {
        'ç' | 'Ç' => 'c',
        'ğ' | 'Ğ' => 'g',
        'ı' | 'I' | 'İ' | 'î' | 'Î' => 'i',
        'ö' | 'Ö' => 'o',
        'ş' | 'Ş' => 's',
        'ü' | 'Ü' | 'û' | 'Û' => 'u',
        'â' | 'Â' => 'a',
        _ => c.to_lowercase().next().unwrap_or(c),
    }
}

/// Whether a letter of accented text carries the accent its skeleton can
/// take (`ı` counts as the accented form of `i`).
fn is_accented_form(c: char) -> bool {
    matches!(c, 'ç' | 'ğ' | 'ı' | 'ö' | 'ş' | 'ü' | 'Ç' | 'Ğ' | 'I' | 'Ö' | 'Ş' | 'Ü')
}

fn is_target(skeleton: char) -> bool {
    matches!(skeleton, 'c' | 'g' | 'i' | 'o' | 's' | 'u')
}

/// Context patterns per target letter with signed weights: positive means
/// the accented form, negative the plain one.
#[derive(Debug, Clone, PartialEq)]
pub struct DeasciiTable {
    radius: usize,
    patterns: BTreeMap<char, BTreeMap<String, f64>>,
}

/// Padded skeleton of a word: `^` + folded letters + `$`.
fn padded(word: &[char]) -> Vec<char> {
    std::iter::once(WORD_START)
        .chain(word.iter().map(|c| fold(*c)))
        .chain(std::iter::once(WORD_END))
        .collect()
}

/// Every window around padded index `q` with `left, right <= radius`.
fn windows(pad: &[char], q: usize, radius: usize) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for a in 0..=radius.min(q) {
        for b in 0..=radius.min(pad.len() - 1 - q) {
            let mut p: String = pad[q - a..q].iter().collect();
            p.push(SLOT);
            p.extend(&pad[q + 1..=q + b]);
            out.push((a + b, p));
        }
    }
    out
}

impl DeasciiTable {
    pub fn new(radius: usize) -> Self {
        DeasciiTable {
            radius,
            patterns: BTreeMap::new(),
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.patterns.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert a pattern such as `^t_rk` for letter `u`.
    pub fn insert(&mut self, letter: char, pattern: &str, weight: f64) -> Result<()> {
        let key = fold(letter);
        if !is_target(key) {
            return Err(Error::input(format!("{letter:?} is not a deasciification target")));
        }
        let (left, right) = pattern
            .split_once(SLOT)
            .ok_or_else(|| Error::input(format!("pattern {pattern:?} has no slot")))?;
        if right.contains(SLOT) || left.chars().count() > self.radius || right.chars().count() > self.radius {
            return Err(Error::input(format!("pattern {pattern:?} does not fit radius {}", self.radius)));
        }
        if !weight.is_finite() {
            return Err(Error::input("pattern weight must be finite"));
        }
        self.patterns.entry(key).or_default().insert(pattern.to_string(), weight);
        Ok(())
    }

    /// Learn from correctly accented words: for every target letter, keep
    /// the shortest window (most frequent among equals) whose label is the
    /// same at every occurrence in the word list.
    pub fn learn<I, S>(words: I, radius: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut occurrences = Vec::new();
        let mut counts: BTreeMap<(char, String), (u64, u64)> = BTreeMap::new();
        for w in words {
            let chars: Vec<char> = w.as_ref().chars().collect();
            for seg in chars.split(|c| !c.is_alphabetic()) {
                let pad = padded(seg);
                for (p, c) in seg.iter().enumerate() {
                    let key = fold(*c);
                    if !is_target(key) {
                        continue;
                    }
                    let positive = is_accented_form(*c);
                    let wins = windows(&pad, p + 1, radius);
                    for (_, pat) in &wins {
                        let e = counts.entry((key, pat.clone())).or_default();
                        if positive {
                            e.0 += 1;
                        } else {
                            e.1 += 1;
                        }
                    }
                    occurrences.push((key, positive, wins));
                }
            }
        }
        let mut table = DeasciiTable::new(radius);
        for (key, positive, mut wins) in occurrences {
            let support = |pat: &String| {
                let (p, n) = counts[&(key, pat.clone())];
                p + n
            };
            wins.sort_by(|x, y| {
                x.0.cmp(&y.0)
                    .then_with(|| support(&y.1).cmp(&support(&x.1)))
                    .then_with(|| x.1.cmp(&y.1))
            });
            let pure = wins.into_iter().find(|(_, pat)| {
                let (p, n) = counts[&(key, pat.clone())];
                if positive {
                    n == 0
                } else {
                    p == 0
                }
            });
            if let Some((_, pat)) = pure {
                let (p, n) = counts[&(key, pat.clone())];
                let weight = if positive { p as f64 } else { -(n as f64) };
                table.patterns.entry(key).or_default().insert(pat, weight);
            }
        }
        table
    }

    /// Lines `letter<TAB>pattern<TAB>weight`; `#` starts a comment line.
    pub fn load<R: BufRead>(source: R, radius: usize) -> Result<Self> {
        let mut table = DeasciiTable::new(radius);
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(lineno, "expected letter, pattern and weight"));
            }
            let mut letter = fields[0].chars();
            let (Some(c), None) = (letter.next(), letter.next()) else {
                return Err(Error::parse(lineno, "letter must be a single character"));
            };
            let weight: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad weight {:?}", fields[2])))?;
            table
                .insert(c, fields[1], weight)
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        for (letter, pats) in &self.patterns {
            for (p, w) in pats {
                writeln!(sink, "{letter}\t{p}\t{w}")?;
            }
        }
        Ok(())
    }

    /// The table learned from the bundled word list.
    pub fn shipped() -> Self {
        Self::load(SHIPPED_TABLE.as_bytes(), DEFAULT_RADIUS).expect("bundled deascii table parses")
    }

    /// Decision for the letter at padded index `q`: `Some(true)` accented,
    /// `Some(false)` plain, `None` when no pattern decides.
    fn decide(&self, key: char, pad: &[char], q: usize) -> Option<bool> {
        let pats = self.patterns.get(&key)?;
        let mut best_len = None;
        let mut signs = (false, false);
        for (len, pat) in windows(pad, q, self.radius) {
            let Some(w) = pats.get(&pat) else { continue };
            if best_len.is_some_and(|b| len < b) || *w == 0.0 {
                continue;
            }
            if best_len != Some(len) {
                best_len = Some(len);
                signs = (false, false);
            }
            if *w > 0.0 {
                signs.0 = true;
            } else {
                signs.1 = true;
            }
        }
        match signs {
            (true, false) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }
}

/// Replace ASCII candidate letters whose best pattern says so. Capital `I`
/// is ambiguous both ways: it stays `I` (dotless) unless the table says the
/// letter is a plain `i`, in which case it becomes `İ`.
pub fn deasciify(text: &str, table: &DeasciiTable) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut start = 0;
    while start < chars.len() {
        if !chars[start].is_alphabetic() {
            out.push(chars[start]);
            start += 1;
            continue;
        }
        let end = chars[start..]
            .iter()
            .position(|c| !c.is_alphabetic())
            .map_or(chars.len(), |k| start + k);
        let word = &chars[start..end];
        let pad = padded(word);
        for (p, c) in word.iter().enumerate() {
            let key = fold(*c);
            let Some(acc) = accented(*c) else {
                out.push(*c);
                continue;
            };
            out.push(match (*c, table.decide(key, &pad, p + 1)) {
                ('I', Some(false)) => 'İ',
                ('I', _) => 'I',
                (_, Some(true)) => acc,
                _ => *c,
            });
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_matches_learning() {
        let learned = DeasciiTable::learn(SHIPPED_WORDS.lines(), DEFAULT_RADIUS);
        let mut a = Vec::new();
        learned.save(&mut a).unwrap();
        if std::env::var_os("TNLP_WRITE_DEASCII").is_some() {
            std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/deascii.tsv"), &a).unwrap();
        }
        assert_eq!(String::from_utf8(a).unwrap(), SHIPPED_TABLE);
    }

    #[test]
    fn examples() {
        let t = DeasciiTable::shipped();
        assert_eq!(deasciify("Turkce", &t), "Türkçe");
        assert_eq!(deasciify("masa", &t), "masa");
        assert_eq!(deasciify("", &t), "");
        assert_eq!(deasciify("cok guzel bir cicek", &t), "çok güzel bir çiçek");
    }

    #[test]
    fn longest_match_and_ties() {
        let mut t = DeasciiTable::new(2);
        t.insert('s', "_", 1.0).unwrap();
        t.insert('s', "a_a", -3.0).unwrap();
        assert_eq!(deasciify("kas masa", &t), "kaş masa");
        t.insert('s', "^_", 1.0).unwrap();
        t.insert('s', "_a", -1.0).unwrap();
        assert_eq!(deasciify("sa", &t), "sa");
        assert!(t.insert('a', "_", 1.0).is_err());
        assert!(t.insert('s', "abc_", 1.0).is_err());
    }

    #[test]
    fn capital_i() {
        let t = DeasciiTable::shipped();
        assert_eq!(deasciify("Istanbul", &t), "İstanbul");
        assert_eq!(deasciify("ISIK", &t), "IŞIK");
    }
}
