//! Dataset readers (CoNLL-U, IO-tagged NER, sentiment TSV), stratified
//! splitting and evaluation metrics.

pub mod metrics;

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::tasks::NER_TAGS;

pub use metrics::{accuracy, f1_macro, las_uas, word_error_rate};

/// One sentence of a CoNLL-U treebank, restricted to the columns in use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluSentence {
    pub forms: Vec<String>,
    pub upos: Vec<String>,
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
}

impl ConlluSentence {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

/// Parse CoNLL-U, skipping comments, multiword ranges and empty nodes.
/// Relation subtypes are dropped (`nsubj:pass` becomes `nsubj`).
pub fn read_conllu<R: BufRead>(source: R) -> Result<Vec<ConlluSentence>> {
    let mut out = Vec::new();
    let mut cur = ConlluSentence {
        forms: Vec::new(),
        upos: Vec::new(),
        heads: Vec::new(),
        deprels: Vec::new(),
    };
    let mut start_line = 1;
    let mut finish = |cur: &mut ConlluSentence, start_line: usize| -> Result<()> {
        if cur.is_empty() {
            return Ok(());
        }
        let n = cur.len();
        if let Some(h) = cur.heads.iter().find(|h| **h > n) {
            return Err(Error::data(
                Some(start_line),
                format!("head {h} outside a {n}-word sentence"),
            ));
        }
        out.push(std::mem::replace(
            cur,
            ConlluSentence {
                forms: Vec::new(),
                upos: Vec::new(),
                heads: Vec::new(),
                deprels: Vec::new(),
            },
        ));
        Ok(())
    };
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            finish(&mut cur, start_line)?;
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        if cur.is_empty() {
            start_line = lineno;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(lineno, format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("HEAD {:?} is not an integer", cols[6])))?;
        let rel = cols[7].split(':').next().unwrap_or("");
        cur.forms.push(cols[1].to_string());
        cur.upos.push(cols[3].to_string());
        cur.heads.push(head);
        cur.deprels.push(rel.to_string());
    }
    finish(&mut cur, start_line)?;
    Ok(out)
}

/// Parse `token<TAB>tag` lines with IO tags, blank line between sentences.
pub fn read_ner_io<R: BufRead>(source: R) -> Result<Vec<(Vec<String>, Vec<String>)>> {
    let mut out = Vec::new();
    let mut words = Vec::new();
    let mut tags = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !words.is_empty() {
                out.push((std::mem::take(&mut words), std::mem::take(&mut tags)));
            }
            continue;
        }
        let (word, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected token<TAB>tag"))?;
        if word.is_empty() {
            return Err(Error::parse(lineno, "empty token"));
        }
        NER_TAGS.require(tag, Some(lineno))?;
        words.push(word.to_string());
        tags.push(tag.to_string());
    }
    if !words.is_empty() {
        out.push((words, tags));
    }
    Ok(out)
}

/// Parse `label<TAB>text` lines with label 0 or 1; blank lines are skipped.
pub fn read_sentiment_tsv<R: BufRead>(source: R) -> Result<Vec<(String, bool)>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected label<TAB>text"))?;
        let label = match label {
            "0" => false,
            "1" => true,
            other => return Err(Error::data(Some(lineno), format!("label {other:?} is not 0 or 1"))),
        };
        if text.trim().is_empty() {
            return Err(Error::data(Some(lineno), "empty text"));
        }
        out.push((text.to_string(), label));
    }
    Ok(out)
}

/// SplitMix64 generator used for reproducible shuffles.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Fisher-Yates from the back, `j = next_u64() % (i + 1)`.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            xs.swap(i, j);
        }
    }
}

/// Per class (in sorted label order), shuffle the member indices with one
/// shared generator and send the first `round(size * fraction)` to test.
/// Both index lists come back sorted.
pub fn stratified_split<L: Ord + Clone>(
    labels: &[L],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Range(format!("test fraction {test_fraction} is not in (0, 1)")));
    }
    let mut classes: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in classes.values_mut() {
        if members.len() < 2 {
            return Err(Error::data(None, "cannot stratify a class with a single member"));
        }
        rng.shuffle(members);
        let k = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
