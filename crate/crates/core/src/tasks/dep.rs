//! Dependency parsing as per-word multi-label classification: one sigmoid
//! vector holding an absolute head-position segment and a relation segment.

use std::path::Path;

use crate::context_model::{expect_kind, train_step, ContextModelConfig, ContextTrunk, TagInput};
use crate::error::{Error, Result};
use crate::neural::persist::{load_model, restore_into, save_model};
use crate::neural::{argmax, seeded_rng, Activation, AdamState, Dense, Gradients, Graph, ParamStore, TrainConfig, Var};
use crate::unigram::UnigramVocab;

use super::encode_words;

pub const MANIFEST_KIND: &str = "dep_parser";
/// Relative head offsets fed back as history are clipped to ±this.
pub const MAX_OFFSET: i64 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepParserConfig {
    pub context: ContextModelConfig,
    /// Capacity `L` of the head segment; position 0 is the root.
    pub max_sentence_len: usize,
    /// Number of relation labels `R`.
    pub num_labels: usize,
}

impl DepParserConfig {
    pub fn new(context: ContextModelConfig, num_labels: usize) -> Self {
        DepParserConfig {
            context,
            max_sentence_len: 64,
            num_labels,
        }
    }

    /// `(L + 1) + R`.
    pub fn output_width(&self) -> usize {
        self.max_sentence_len + 1 + self.num_labels
    }

    /// Rows of the history embedding: labels, then clipped offsets.
    pub fn history_vocab(&self) -> usize {
        self.num_labels + (2 * MAX_OFFSET + 1) as usize
    }
}

/// Head (0 = root, otherwise 1-based word position) and relation id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DepArc {
    pub head: usize,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepSentence {
    pub words: Vec<String>,
    pub subword_ids: Vec<Vec<u32>>,
    pub arcs: Vec<DepArc>,
}

impl DepSentence {
    pub fn new(words: Vec<String>, subword_ids: Vec<Vec<u32>>, arcs: Vec<DepArc>) -> Result<Self> {
        if words.len() != subword_ids.len() || words.len() != arcs.len() {
            return Err(Error::input("misaligned dependency sentence"));
        }
        Ok(DepSentence {
            words,
            subword_ids,
            arcs,
        })
    }
}

/// Layer layout of the parser, independent of parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct DepNet {
    pub trunk: ContextTrunk,
    pub head: Dense,
    pub num_labels: usize,
}

impl DepNet {
    /// History item for the word at 0-based `index`.
    pub fn history_item(&self, index: usize, arc: DepArc) -> TagInput {
        let offset = (arc.head as i64 - (index as i64 + 1)).clamp(-MAX_OFFSET, MAX_OFFSET);
        vec![arc.label, self.num_labels + (offset + MAX_OFFSET) as usize]
    }

    fn output(&self, g: &mut Graph, vecs: &[Option<Var>], index: usize, history: &[TagInput]) -> Result<Var> {
        let h = self.trunk.fuse(g, vecs, index, history)?;
        self.head.forward(g, h, Activation::Sigmoid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepParser {
    pub config: DepParserConfig,
    pub labels: Vec<String>,
    pub store: ParamStore,
    pub net: DepNet,
}

/// Pick the best legal head among positions `0..=n` other than the word's
/// own, and the best label.
pub fn decode_arc(output: &[f64], n: usize, index: usize, max_len: usize) -> DepArc {
    let own = index + 1;
    let mut head = 0;
    let mut best = f64::NEG_INFINITY;
    for (p, v) in output.iter().enumerate().take(n.min(max_len) + 1) {
        if p != own && *v > best {
            best = *v;
            head = p;
        }
    }
    DepArc {
        head,
        label: argmax(&output[max_len + 1..]),
    }
}

impl DepParser {
    pub fn new(config: DepParserConfig, labels: Vec<String>, seed: u64) -> Result<Self> {
        if config.max_sentence_len == 0 || config.num_labels == 0 {
            return Err(Error::config("parser needs positive capacity and label count"));
        }
        if labels.len() != config.num_labels {
            return Err(Error::config(format!(
                "{} label names for {} labels",
                labels.len(),
                config.num_labels
            )));
        }
        if labels.iter().any(|l| l.is_empty() || l.contains(' ')) {
            return Err(Error::config("labels must be non-empty and contain no spaces"));
        }
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        let trunk = ContextTrunk::new(&mut store, &config.context, config.history_vocab(), &mut rng)?;
        let head = Dense::new(&mut store, "head", config.context.fc2_units, config.output_width(), &mut rng)?;
        // Start every output at its segment's uniform prior: one position in
        // L + 1 is the head, one label in R is right.
        let prior = |k: usize| if k > 1 { -((k - 1) as f64).ln() } else { 0.0 };
        let bias = &mut store.get_mut(head.b).data;
        let arcs = config.max_sentence_len + 1;
        for (i, b) in bias.iter_mut().enumerate() {
            *b = if i < arcs { prior(arcs) } else { prior(config.num_labels) };
        }
        let num_labels = config.num_labels;
        Ok(DepParser {
            config,
            labels,
            store,
            net: DepNet {
                trunk,
                head,
                num_labels,
            },
        })
    }

    pub fn count_params(&self) -> usize {
        self.store.count()
    }

    pub fn label_id(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::input("cannot parse an empty sentence"));
        }
        if n > self.config.max_sentence_len {
            return Err(Error::Range(format!(
                "sentence of {n} words exceeds the parser capacity of {}",
                self.config.max_sentence_len
            )));
        }
        Ok(())
    }

    fn check_gold(&self, s: &DepSentence) -> Result<()> {
        let n = s.words.len();
        self.check_len(n).map_err(|e| Error::data(None, e.to_string()))?;
        for (i, a) in s.arcs.iter().enumerate() {
            if a.head > n || a.head == i + 1 || a.label >= self.config.num_labels {
                return Err(Error::data(
                    None,
                    format!("malformed gold arc {} -> {} label {}", i + 1, a.head, a.label),
                ));
            }
        }
        Ok(())
    }

    /// Greedy left-to-right parse; predicted arcs feed the history.
    pub fn parse_encoded(&self, sentence: &[Vec<u32>]) -> Result<Vec<DepArc>> {
        self.check_len(sentence.len())?;
        let mut g = Graph::new(&self.store);
        let vecs: Vec<Option<Var>> = self.net.trunk.word_vectors(&mut g, sentence)?.into_iter().map(Some).collect();
        let mut history = Vec::with_capacity(sentence.len());
        let mut arcs = Vec::with_capacity(sentence.len());
        for i in 0..sentence.len() {
            let out = self.net.output(&mut g, &vecs, i, &history)?;
            let arc = decode_arc(g.value(out), sentence.len(), i, self.config.max_sentence_len);
            history.push(self.net.history_item(i, arc));
            arcs.push(arc);
        }
        Ok(arcs)
    }

    /// Sigmoid outputs at every position with `arcs` fed as history.
    pub fn teacher_forced_outputs(&self, sentence: &[Vec<u32>], arcs: &[DepArc]) -> Result<Vec<Vec<f64>>> {
        self.check_len(sentence.len())?;
        if arcs.len() != sentence.len() {
            return Err(Error::input("one arc per word is required"));
        }
        if let Some(a) = arcs.iter().find(|a| a.label >= self.config.num_labels || a.head > sentence.len()) {
            return Err(Error::input(format!("arc {} label {} is outside the parser", a.head, a.label)));
        }
        let mut g = Graph::new(&self.store);
        let vecs: Vec<Option<Var>> = self.net.trunk.word_vectors(&mut g, sentence)?.into_iter().map(Some).collect();
        let history: Vec<TagInput> = arcs.iter().enumerate().map(|(i, a)| self.net.history_item(i, *a)).collect();
        (0..sentence.len())
            .map(|i| {
                let out = self.net.output(&mut g, &vecs, i, &history[..i])?;
                Ok(g.value(out).to_vec())
            })
            .collect()
    }

    /// Multi-hot target: gold head position and `(L + 1) + gold label`.
    pub fn target(&self, arc: DepArc) -> Vec<f64> {
        let mut t = vec![0.0; self.config.output_width()];
        t[arc.head] = 1.0;
        t[self.config.max_sentence_len + 1 + arc.label] = 1.0;
        t
    }

    /// Summed teacher-forced binary cross-entropy and its gradient.
    pub fn sentence_loss(&self, store: &ParamStore, s: &DepSentence) -> Result<(f64, Gradients)> {
        self.check_gold(s)?;
        let mut g = Graph::new(store);
        let vecs: Vec<Option<Var>> = self
            .net
            .trunk
            .word_vectors(&mut g, &s.subword_ids)?
            .into_iter()
            .map(Some)
            .collect();
        let history: Vec<TagInput> = s.arcs.iter().enumerate().map(|(i, a)| self.net.history_item(i, *a)).collect();
        let mut losses = Vec::with_capacity(s.arcs.len());
        for (i, arc) in s.arcs.iter().enumerate() {
            let out = self.net.output(&mut g, &vecs, i, &history[..i])?;
            losses.push(g.binary_cross_entropy(out, &self.target(*arc))?);
        }
        let total = g.sum(&losses)?;
        Ok((g.scalar(total), g.backward(total)))
    }

    pub fn train_epoch(
        &mut self,
        corpus: &[DepSentence],
        tc: &TrainConfig,
        adam: &mut AdamState,
        epoch: usize,
    ) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::input("training corpus is empty"));
        }
        let lr = tc.lr_at(epoch);
        let mut total = 0.0;
        let mut words = 0;
        for s in corpus {
            self.check_gold(s)?;
            let history: Vec<TagInput> = s.arcs.iter().enumerate().map(|(i, a)| self.net.history_item(i, *a)).collect();
            for (i, arc) in s.arcs.iter().enumerate() {
                let target = self.target(*arc);
                let net = &self.net;
                let loss = train_step(&mut self.store, adam, tc, lr, |g| {
                    let vecs = net.trunk.window_vectors(g, &s.subword_ids, i)?;
                    let out = net.output(g, &vecs, i, &history[..i])?;
                    Ok(Some(g.binary_cross_entropy(out, &target)?))
                })?;
                total += loss.unwrap_or(0.0);
                words += 1;
            }
        }
        Ok(total / words.max(1) as f64)
    }

    pub fn fit(
        &mut self,
        corpus: &[DepSentence],
        tc: &TrainConfig,
        on_epoch: &mut dyn FnMut(usize, f64),
    ) -> Result<Vec<f64>> {
        tc.validate()?;
        let mut adam = AdamState::new(&self.store);
        let mut losses = Vec::with_capacity(tc.epochs);
        for e in 0..tc.epochs {
            let loss = self.train_epoch(corpus, tc, &mut adam, e)?;
            on_epoch(e, loss);
            losses.push(loss);
        }
        self.store.round_to_f32();
        Ok(losses)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut config = self.config.context.to_pairs();
        config.push(("max_sentence_len".to_string(), self.config.max_sentence_len.to_string()));
        config.push(("num_labels".to_string(), self.config.num_labels.to_string()));
        config.push(("labels".to_string(), self.labels.join(" ")));
        save_model(dir, MANIFEST_KIND, &config, &self.store)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (manifest, store) = load_model(dir)?;
        expect_kind(&manifest, MANIFEST_KIND)?;
        let config = DepParserConfig {
            context: ContextModelConfig::from_manifest(&manifest)?,
            max_sentence_len: manifest.parse_usize("max_sentence_len")?,
            num_labels: manifest.parse_usize("num_labels")?,
        };
        let labels = manifest.require("labels")?.split(' ').map(str::to_string).collect();
        let mut model = DepParser::new(config, labels, 0)?;
        restore_into(&mut model.store, &store)?;
        Ok(model)
    }
}

pub fn parse_dependencies<S: AsRef<str>>(model: &DepParser, words: &[S], vocab: &UnigramVocab) -> Result<Vec<DepArc>> {
    model.parse_encoded(&encode_words(vocab, words)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_masks_self_and_out_of_range() {
        // L = 4, R = 2; the largest arc score sits past the sentence end
        let out = [0.1, 0.2, 0.9, 0.3, 0.95, 0.4, 0.6];
        let arc = decode_arc(&out, 3, 1, 4);
        assert_eq!(arc, DepArc { head: 3, label: 1 });
        let arc = decode_arc(&out, 1, 0, 4);
        assert_eq!(arc.head, 0);
    }

    #[test]
    fn history_offsets_are_clipped() {
        let cfg = DepParserConfig::new(
            ContextModelConfig {
                num_tags: 1,
                vocab_size: 8,
                ..Default::default()
            },
            3,
        );
        let p = DepParser::new(cfg, vec!["a".into(), "b".into(), "c".into()], 0).unwrap();
        assert_eq!(p.net.history_item(0, DepArc { head: 2, label: 1 }), vec![1, 3 + 9]);
        assert_eq!(p.net.history_item(19, DepArc { head: 0, label: 0 }), vec![0, 3]);
        assert_eq!(p.net.history_item(0, DepArc { head: 40, label: 2 }), vec![2, 3 + 16]);
        assert_eq!(p.config.output_width(), 65 + 3);
    }
}
