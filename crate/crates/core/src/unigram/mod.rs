//! Unigram language-model subword tokenizer.
//!
//! Every whitespace-separated word is segmented on its own; there is no
//! word-boundary marker. Piece ids 0..4 are reserved for the special tokens.

mod trainer;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub use trainer::{em_step, train_unigram, EmStep, TrainerConfig};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];
const NUM_SPECIALS: u32 = SPECIALS.len() as u32;

/// Longest piece (in characters) the trainer will seed.
pub const MAX_PIECE_CHARS: usize = 8;

/// Log-probability margin below the least likely piece charged for an
/// unknown character.
const UNK_PENALTY: f64 = 10.0;

/// Subword pieces with their log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramVocab {
    pieces: Vec<(String, f64)>,
    index: HashMap<String, u32>,
    max_piece_chars: usize,
    unk_score: f64,
}

impl UnigramVocab {
    /// Build a vocabulary; piece `i` receives id `4 + i`.
    pub fn from_pieces(pieces: Vec<(String, f64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        let mut max_piece_chars = 1;
        for (i, (piece, lp)) in pieces.iter().enumerate() {
            if piece.is_empty() || piece.chars().any(char::is_whitespace) {
                return Err(Error::input(format!("invalid piece {piece:?}")));
            }
            if SPECIALS.contains(&piece.as_str()) {
                return Err(Error::input(format!("{piece} is reserved")));
            }
            if !(lp.is_finite() && *lp <= 0.0) {
                return Err(Error::input(format!("piece {piece} has log-probability {lp}")));
            }
            if index.insert(piece.clone(), NUM_SPECIALS + i as u32).is_some() {
                return Err(Error::input(format!("duplicate piece {piece}")));
            }
            max_piece_chars = max_piece_chars.max(piece.chars().count());
        }
        let min_lp = pieces.iter().map(|p| p.1).fold(0.0, f64::min);
        Ok(UnigramVocab {
            pieces,
            index,
            max_piece_chars,
            unk_score: min_lp - UNK_PENALTY,
        })
    }

    /// Number of ids including the special tokens.
    pub fn len(&self) -> usize {
        self.pieces.len() + SPECIALS.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Non-special pieces in id order.
    pub fn pieces(&self) -> &[(String, f64)] {
        &self.pieces
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        match id {
            i if i < NUM_SPECIALS => Some(SPECIALS[i as usize]),
            i => self.pieces.get((i - NUM_SPECIALS) as usize).map(|p| p.0.as_str()),
        }
    }

    pub fn log_prob(&self, id: u32) -> Option<f64> {
        if id == UNK_ID {
            return Some(self.unk_score);
        }
        id.checked_sub(NUM_SPECIALS)
            .and_then(|i| self.pieces.get(i as usize))
            .map(|p| p.1)
    }

    /// Sum of piece log-probabilities of a segmentation.
    pub fn score(&self, ids: &[u32]) -> f64 {
        ids.iter().map(|id| self.log_prob(*id).unwrap_or(f64::NEG_INFINITY)).sum()
    }

    /// Most likely segmentation of one word.
    pub fn encode_word(&self, word: &str) -> Vec<u32> {
        viterbi(word, self.max_piece_chars, self.unk_score, |s| {
            self.index.get(s).map(|id| (*id, self.pieces[(id - NUM_SPECIALS) as usize].1))
        })
        .into_iter()
        .map(|(id, _)| id.unwrap_or(UNK_ID))
        .collect()
    }

    /// Whitespace-split `text` and encode every word separately.
    pub fn encode_text(&self, text: &str) -> Vec<Vec<u32>> {
        text.split_whitespace().map(|w| self.encode_word(w)).collect()
    }

    /// All pieces of `text` as one flat sequence.
    pub fn encode_flat(&self, text: &str) -> Vec<u32> {
        self.encode_text(text).into_iter().flatten().collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter().map(|id| self.piece(*id).unwrap_or(SPECIALS[1])).collect()
    }

    /// Write the vocabulary file: a `UNIGRAM v1 <count>` header, then
    /// `piece<TAB>logprob` lines with the specials first.
    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "UNIGRAM v1 {}", self.len())?;
        for s in SPECIALS {
            writeln!(sink, "{s}\t0")?;
        }
        for (piece, lp) in &self.pieces {
            writeln!(sink, "{piece}\t{lp}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "empty vocabulary file"))??;
        let count: usize = header
            .strip_prefix("UNIGRAM v1 ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::parse(1, format!("bad header {header:?}")))?;
        let mut pieces = Vec::new();
        let mut seen = 0usize;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            let (piece, lp) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(lineno, "expected piece<TAB>logprob"))?;
            let lp: f64 = lp
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad log-probability {lp:?}")))?;
            if seen < SPECIALS.len() {
                if piece != SPECIALS[seen] {
                    return Err(Error::parse(lineno, format!("expected special {}", SPECIALS[seen])));
                }
            } else {
                if pieces.iter().any(|(p, _): &(String, f64)| p == piece) {
                    return Err(Error::parse(lineno, format!("duplicate piece {piece}")));
                }
                pieces.push((piece.to_string(), lp));
            }
            seen += 1;
        }
        if seen < SPECIALS.len() {
            return Err(Error::parse(seen + 2, "missing special tokens"));
        }
        if seen != count {
            return Err(Error::parse(1, format!("header announces {count} pieces, found {seen}")));
        }
        Self::from_pieces(pieces).map_err(|e| Error::parse(0, e.to_string()))
    }
}

/// Best segmentation of `word` under `lookup`. Returns `(id, piece)` pairs;
/// `None` marks an unknown character. Ties on score prefer fewer pieces,
/// then the lexicographically smallest first piece.
pub(crate) fn viterbi<F>(
    word: &str,
    max_chars: usize,
    unk_score: f64,
    lookup: F,
) -> Vec<(Option<u32>, &str)>
where
    F: Fn(&str) -> Option<(u32, f64)>,
{
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(word.len()))
        .collect();
    let n = bounds.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    #[derive(Clone, Copy)]
    struct Best {
        score: f64,
        count: usize,
        end: usize,
        id: Option<u32>,
    }
    let mut best: Vec<Option<Best>> = vec![None; n + 1];
    best[n] = Some(Best {
        score: 0.0,
        count: 0,
        end: n,
        id: None,
    });
    for i in (0..n).rev() {
        let mut cur: Option<Best> = None;
        for len in 1..=max_chars.min(n - i) {
            let piece = &word[bounds[i]..bounds[i + len]];
            let Some((id, lp)) = lookup(piece) else { continue };
            let Some(rest) = best[i + len] else { continue };
            let cand = Best {
                score: lp + rest.score,
                count: rest.count + 1,
                end: i + len,
                id: Some(id),
            };
            cur = Some(match cur {
                None => cand,
                Some(c) => {
                    if better(&cand, &c, |b| &word[bounds[i]..bounds[b.end]]) {
                        cand
                    } else {
                        c
                    }
                }
            });
        }
        if cur.is_none() && lookup(&word[bounds[i]..bounds[i + 1]]).is_none() {
            if let Some(rest) = best[i + 1] {
                cur = Some(Best {
                    score: unk_score + rest.score,
                    count: rest.count + 1,
                    end: i + 1,
                    id: None,
                });
            }
        }
        best[i] = cur;
    }

    fn better<'a>(a: &Best, b: &Best, text: impl Fn(&Best) -> &'a str) -> bool {
        let tol = 1e-12 * a.score.abs().max(b.score.abs()).max(1.0);
        if (a.score - b.score).abs() > tol {
            return a.score > b.score;
        }
        if a.count != b.count {
            return a.count < b.count;
        }
        text(a) < text(b)
    }

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let b = best[i].expect("every position is reachable through unknown-character edges");
        out.push((b.id, &word[bounds[i]..bounds[b.end]]));
        i = b.end;
    }
    out
}
