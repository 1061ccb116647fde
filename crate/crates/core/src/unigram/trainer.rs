//! EM training of a unigram vocabulary with likelihood-based pruning.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{viterbi, UnigramVocab, MAX_PIECE_CHARS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Number of non-special pieces to stop at.
    pub target_size: usize,
    /// Number of multi-character substrings in the initial vocabulary.
    pub seed_size: usize,
    /// Fraction of pieces kept by each pruning round.
    pub shrink_factor: f64,
    /// EM iterations between pruning rounds.
    pub em_iterations: usize,
    pub max_piece_chars: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            target_size: 2000,
            seed_size: 20000,
            shrink_factor: 0.75,
            em_iterations: 2,
            max_piece_chars: MAX_PIECE_CHARS,
        }
    }
}

/// Result of one EM iteration at a fixed piece set.
#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    /// Corpus log-likelihood under the log-probabilities passed in.
    pub log_likelihood: f64,
    /// Expected number of uses of each piece.
    pub counts: Vec<f64>,
    /// Re-estimated log-probabilities (`-inf` for unused pieces).
    pub log_probs: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// One expectation-maximization step: lattice forward-backward over every
/// word, then maximum-likelihood re-estimation of piece probabilities.
pub fn em_step(pieces: &[(String, f64)], words: &[(String, u64)]) -> Result<EmStep> {
    let index: HashMap<&str, usize> = pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1 > f64::NEG_INFINITY)
        .map(|(i, p)| (p.0.as_str(), i))
        .collect();
    let max_chars = pieces.iter().map(|p| p.0.chars().count()).max().unwrap_or(1);
    let mut counts = vec![0.0; pieces.len()];
    let mut log_likelihood = 0.0;

    for (word, freq) in words {
        let bounds: Vec<usize> = word
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(word.len()))
            .collect();
        let n = bounds.len() - 1;
        let mut edges = Vec::new();
        for i in 0..n {
            for len in 1..=max_chars.min(n - i) {
                if let Some(&k) = index.get(&word[bounds[i]..bounds[i + len]]) {
                    edges.push((i, i + len, k, pieces[k].1));
                }
            }
        }
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        // edges are sorted by start position, so alpha[i] is final when used
        for &(i, j, _, lp) in &edges {
            alpha[j] = log_add(alpha[j], alpha[i] + lp);
        }
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        beta[n] = 0.0;
        for &(i, j, _, lp) in edges.iter().rev() {
            beta[i] = log_add(beta[i], lp + beta[j]);
        }
        let z = alpha[n];
        if z == f64::NEG_INFINITY {
            return Err(Error::input(format!("word {word:?} cannot be segmented")));
        }
        let f = *freq as f64;
        log_likelihood += f * z;
        for &(i, j, k, lp) in &edges {
            counts[k] += f * (alpha[i] + lp + beta[j] - z).exp();
        }
    }
    let total: f64 = counts.iter().sum();
    let log_probs = counts
        .iter()
        .map(|c| if *c > 0.0 { (c / total).ln() } else { f64::NEG_INFINITY })
        .collect();
    Ok(EmStep {
        log_likelihood,
        counts,
        log_probs,
    })
}

fn is_char(piece: &str) -> bool {
    piece.chars().nth(1).is_none()
}

/// Train a vocabulary from `(word, count)` pairs.
pub fn train_unigram<I, S>(corpus: I, config: &TrainerConfig) -> Result<UnigramVocab>
where
    I: IntoIterator<Item = (S, u64)>,
    S: AsRef<str>,
{
    let mut freqs: BTreeMap<String, u64> = BTreeMap::new();
    for (w, c) in corpus {
        for token in w.as_ref().split_whitespace() {
            if c > 0 {
                *freqs.entry(token.to_string()).or_default() += c;
            }
        }
    }
    if freqs.is_empty() {
        return Err(Error::input("training corpus is empty"));
    }
    if !(config.shrink_factor > 0.0 && config.shrink_factor < 1.0) {
        return Err(Error::config("shrink_factor must lie in (0, 1)"));
    }
    if config.seed_size < config.target_size {
        return Err(Error::config("seed_size must be at least target_size"));
    }
    if config.max_piece_chars == 0 || config.em_iterations == 0 {
        return Err(Error::config("max_piece_chars and em_iterations must be positive"));
    }
    let alphabet: BTreeSet<char> = freqs.keys().flat_map(|w| w.chars()).collect();
    if config.target_size < alphabet.len() {
        return Err(Error::config(format!(
            "target size {} is below the alphabet size {}",
            config.target_size,
            alphabet.len()
        )));
    }
    let words: Vec<(String, u64)> = freqs.into_iter().collect();

    let mut pieces = seed_pieces(&words, config);
    loop {
        for _ in 0..config.em_iterations {
            let step = em_step(&pieces, &words)?;
            for (p, lp) in pieces.iter_mut().zip(step.log_probs) {
                p.1 = lp;
            }
        }
        if pieces.len() <= config.target_size {
            break;
        }
        pieces = prune(&pieces, &words, config)?;
    }
    finalize(pieces, &words)
}

/// Every single character plus the `seed_size` most frequent longer substrings,
/// scored by relative frequency. Sorted by piece string.
fn seed_pieces(words: &[(String, u64)], config: &TrainerConfig) -> Vec<(String, f64)> {
    let mut chars: BTreeMap<String, u64> = BTreeMap::new();
    let mut subs: HashMap<&str, u64> = HashMap::new();
    for (w, f) in words {
        let bounds: Vec<usize> = w
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(w.len()))
            .collect();
        let n = bounds.len() - 1;
        for i in 0..n {
            *chars.entry(w[bounds[i]..bounds[i + 1]].to_string()).or_default() += f;
            for len in 2..=config.max_piece_chars.min(n - i) {
                *subs.entry(&w[bounds[i]..bounds[i + len]]).or_default() += f;
            }
        }
    }
    let mut ranked: Vec<(&str, u64)> = subs.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(config.seed_size);

    let mut all: Vec<(String, u64)> = chars.into_iter().collect();
    all.extend(ranked.into_iter().map(|(s, f)| (s.to_string(), f)));
    all.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = all.iter().map(|p| p.1 as f64).sum();
    all.into_iter()
        .map(|(s, f)| (s, (f as f64 / total).ln()))
        .collect()
}

/// Give unused single characters a small finite probability so that every
/// word stays segmentable.
fn floor_chars(pieces: &mut [(String, f64)]) {
    let min = pieces
        .iter()
        .map(|p| p.1)
        .filter(|lp| lp.is_finite())
        .fold(0.0, f64::min);
    for p in pieces.iter_mut() {
        if p.1 == f64::NEG_INFINITY && is_char(&p.0) {
            p.1 = min - 10.0;
        }
    }
}

/// Drop the pieces whose removal costs the least corpus likelihood,
/// keeping every single character.
fn prune(pieces: &[(String, f64)], words: &[(String, u64)], config: &TrainerConfig) -> Result<Vec<(String, f64)>> {
    let mut pieces = pieces.to_vec();
    floor_chars(&mut pieces);
    let step = em_step(&pieces, words)?;
    let counts = &step.counts;
    let total: f64 = counts.iter().sum();
    let index: HashMap<&str, usize> = pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1 > f64::NEG_INFINITY)
        .map(|(i, p)| (p.0.as_str(), i))
        .collect();
    let max_chars = pieces.iter().map(|p| p.0.chars().count()).max().unwrap_or(1);

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let mut n_chars = 0;
    for (k, (piece, lp)) in pieces.iter().enumerate() {
        if is_char(piece) {
            n_chars += 1;
            continue;
        }
        let c = counts[k];
        if c <= 0.0 || *lp == f64::NEG_INFINITY {
            candidates.push((0.0, k));
            continue;
        }
        let alt = viterbi(piece, max_chars, f64::NEG_INFINITY, |s| {
            index
                .get(s)
                .filter(|&&j| j != k)
                .map(|&j| (j as u32, pieces[j].1))
        });
        let logprob_sp = c.ln() - total.ln();
        let logsum_alt = (total + c * (alt.len() as f64 - 1.0)).ln();
        let logprob_alt: f64 = alt
            .iter()
            .map(|(id, _)| {
                let j = id.expect("single characters are always present") as usize;
                (counts[j] + c).ln() - logsum_alt
            })
            .sum();
        candidates.push((c * (logprob_sp - logprob_alt), k));
    }
    let current = pieces.len();
    let desired = ((current as f64 * config.shrink_factor) as usize)
        .max(config.target_size)
        .min(current - 1);
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| pieces[a.1].0.cmp(&pieces[b.1].0))
    });
    let keep: BTreeSet<usize> = candidates
        .iter()
        .take(desired.saturating_sub(n_chars))
        .map(|c| c.1)
        .collect();
    let mut kept: Vec<(String, f64)> = pieces
        .iter()
        .enumerate()
        .filter(|(k, p)| is_char(&p.0) || keep.contains(k))
        .map(|(_, p)| p.clone())
        .collect();
    floor_chars(&mut kept);
    Ok(kept)
}

fn finalize(mut pieces: Vec<(String, f64)>, words: &[(String, u64)]) -> Result<UnigramVocab> {
    floor_chars(&mut pieces);
    let step = em_step(&pieces, words)?;
    let mut counts = step.counts;
    for c in counts.iter_mut() {
        if *c < 1e-12 {
            *c = 0.0;
        }
    }
    let min_pos = counts
        .iter()
        .copied()
        .filter(|c| *c > 0.0)
        .fold(f64::INFINITY, f64::min);
    for (c, p) in counts.iter_mut().zip(&pieces) {
        if *c <= 0.0 && is_char(&p.0) {
            *c = 0.5 * min_pos;
        }
    }
    let total: f64 = counts.iter().sum();
    let mut out: Vec<(String, f64)> = pieces
        .into_iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0.0)
        .map(|(p, c)| (p.0, (c / total).ln().min(0.0)))
        .collect();
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    UnigramVocab::from_pieces(out)
}
