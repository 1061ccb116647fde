//! Word-level tagger fusing four representations of each position: the
//! word's own subwords, the words to its left, the words to its right, and
//! the tags already assigned to the words on its left.
//!
//! The word GRU that turns subword pieces into a word vector is one set of
//! weights used by the current-word, left-context and right-context paths.
//! Decoding is greedy and strictly left to right.

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neural::{
    adam_update, argmax, seeded_rng, Activation, AdamState, Dense, Gradients, Graph, GruParams,
    Init, ParamId, ParamStore, TrainConfig, Var,
};
use crate::neural::persist::{load_model, restore_into, save_model, Manifest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextModelConfig {
    pub subword_embed_dim: usize,
    pub word_rnn_hidden: usize,
    pub left_ctx_hidden: usize,
    pub right_ctx_hidden: usize,
    pub tag_embed_dim: usize,
    pub tag_rnn_hidden: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub num_tags: usize,
    pub max_left_words: usize,
    pub max_right_words: usize,
    pub vocab_size: usize,
}

impl Default for ContextModelConfig {
    fn default() -> Self {
        ContextModelConfig {
            subword_embed_dim: 32,
            word_rnn_hidden: 32,
            left_ctx_hidden: 32,
            right_ctx_hidden: 32,
            tag_embed_dim: 16,
            tag_rnn_hidden: 16,
            fc1_units: 64,
            fc2_units: 32,
            num_tags: 1,
            max_left_words: 40,
            max_right_words: 40,
            vocab_size: 2004,
        }
    }
}

impl ContextModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.subword_embed_dim,
            self.word_rnn_hidden,
            self.left_ctx_hidden,
            self.right_ctx_hidden,
            self.tag_embed_dim,
            self.tag_rnn_hidden,
            self.fc1_units,
            self.fc2_units,
            self.num_tags,
            self.max_left_words,
            self.max_right_words,
            self.vocab_size,
        ];
        if dims.contains(&0) {
            return Err(Error::config("context model dimensions must all be positive"));
        }
        Ok(())
    }

    /// Width of the fused vector fed to the first dense layer.
    pub fn fused_width(&self) -> usize {
        self.word_rnn_hidden + self.left_ctx_hidden + self.right_ctx_hidden + self.tag_rnn_hidden
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("subword_embed_dim", self.subword_embed_dim),
            ("word_rnn_hidden", self.word_rnn_hidden),
            ("left_ctx_hidden", self.left_ctx_hidden),
            ("right_ctx_hidden", self.right_ctx_hidden),
            ("tag_embed_dim", self.tag_embed_dim),
            ("tag_rnn_hidden", self.tag_rnn_hidden),
            ("fc1_units", self.fc1_units),
            ("fc2_units", self.fc2_units),
            ("num_tags", self.num_tags),
            ("max_left_words", self.max_left_words),
            ("max_right_words", self.max_right_words),
            ("vocab_size", self.vocab_size),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        Ok(ContextModelConfig {
            subword_embed_dim: m.parse_usize("subword_embed_dim")?,
            word_rnn_hidden: m.parse_usize("word_rnn_hidden")?,
            left_ctx_hidden: m.parse_usize("left_ctx_hidden")?,
            right_ctx_hidden: m.parse_usize("right_ctx_hidden")?,
            tag_embed_dim: m.parse_usize("tag_embed_dim")?,
            tag_rnn_hidden: m.parse_usize("tag_rnn_hidden")?,
            fc1_units: m.parse_usize("fc1_units")?,
            fc2_units: m.parse_usize("fc2_units")?,
            num_tags: m.parse_usize("num_tags")?,
            max_left_words: m.parse_usize("max_left_words")?,
            max_right_words: m.parse_usize("max_right_words")?,
            vocab_size: m.parse_usize("vocab_size")?,
        })
    }
}

/// One item of tag history: rows of the tag embedding that are summed.
pub type TagInput = Vec<usize>;

/// The shared part of every context-model head: components (a) to (d),
/// concatenated and passed through two tanh dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTrunk {
    pub subword_embedding: ParamId,
    pub word_rnn: GruParams,
    pub left_ctx_rnn: GruParams,
    pub right_ctx_rnn: GruParams,
    pub tag_embedding: ParamId,
    pub tag_rnn: GruParams,
    pub fc1: Dense,
    pub fc2: Dense,
    pub max_left_words: usize,
    pub max_right_words: usize,
    pub tag_vocab: usize,
}

impl ContextTrunk {
    /// Register the trunk's tensors; `tag_vocab` is the number of rows of
    /// the tag-history embedding.
    pub fn new(
        store: &mut ParamStore,
        config: &ContextModelConfig,
        tag_vocab: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if tag_vocab == 0 {
            return Err(Error::config("tag vocabulary must be non-empty"));
        }
        let c = config;
        let emb_init = Init::Uniform(crate::embedding::INIT_RANGE);
        let subword_embedding =
            store.add_init("subword_embedding", &[c.vocab_size, c.subword_embed_dim], emb_init, rng)?;
        let word_rnn = GruParams::new(store, "word_rnn", c.subword_embed_dim, c.word_rnn_hidden, rng)?;
        let left_ctx_rnn = GruParams::new(store, "left_ctx_rnn", c.word_rnn_hidden, c.left_ctx_hidden, rng)?;
        let right_ctx_rnn = GruParams::new(store, "right_ctx_rnn", c.word_rnn_hidden, c.right_ctx_hidden, rng)?;
        let tag_embedding = store.add_init("tag_embedding", &[tag_vocab, c.tag_embed_dim], emb_init, rng)?;
        let tag_rnn = GruParams::new(store, "tag_rnn", c.tag_embed_dim, c.tag_rnn_hidden, rng)?;
        let fc1 = Dense::new(store, "fc1", c.fused_width(), c.fc1_units, rng)?;
        let fc2 = Dense::new(store, "fc2", c.fc1_units, c.fc2_units, rng)?;
        Ok(ContextTrunk {
            subword_embedding,
            word_rnn,
            left_ctx_rnn,
            right_ctx_rnn,
            tag_embedding,
            tag_rnn,
            fc1,
            fc2,
            max_left_words: c.max_left_words,
            max_right_words: c.max_right_words,
            tag_vocab,
        })
    }

    /// Final state of the word GRU run over the word's subword embeddings.
    pub fn word_vector(&self, g: &mut Graph, subword_ids: &[u32]) -> Result<Var> {
        if subword_ids.is_empty() {
            return Err(Error::input("a word needs at least one subword piece"));
        }
        let xs = subword_ids
            .iter()
            .map(|id| g.row(self.subword_embedding, *id as usize))
            .collect::<Result<Vec<_>>>()?;
        let h0 = g.zeros(self.word_rnn.hidden);
        Ok(self.word_rnn.forward(g, h0, &xs, false)?.1)
    }

    /// Word vectors for every word of a sentence.
    pub fn word_vectors(&self, g: &mut Graph, sentence: &[Vec<u32>]) -> Result<Vec<Var>> {
        sentence.iter().map(|w| self.word_vector(g, w)).collect()
    }

    /// Word vectors for the positions `position`'s context window needs;
    /// other entries are `None`.
    pub fn window_vectors(&self, g: &mut Graph, sentence: &[Vec<u32>], position: usize) -> Result<Vec<Option<Var>>> {
        let lo = position.saturating_sub(self.max_left_words);
        let hi = (position + self.max_right_words).min(sentence.len() - 1);
        let mut out = vec![None; sentence.len()];
        for (i, w) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
            out[i] = Some(self.word_vector(g, w)?);
        }
        Ok(out)
    }

    /// Output of the second dense layer for `position`.
    ///
    /// `word_vecs[i]` must be present for every word inside the context
    /// window; `history` holds one item per earlier word.
    pub fn fuse(&self, g: &mut Graph, word_vecs: &[Option<Var>], position: usize, history: &[TagInput]) -> Result<Var> {
        let n = word_vecs.len();
        if position >= n {
            return Err(Error::Range(format!("position {position} in a {n}-word sentence")));
        }
        let need = |i: usize| {
            word_vecs[i].ok_or_else(|| Error::input(format!("word vector {i} was not computed")))
        };
        let current = need(position)?;

        let lo = position.saturating_sub(self.max_left_words);
        let left: Vec<Var> = (lo..position).map(need).collect::<Result<_>>()?;
        let h0 = g.zeros(self.left_ctx_rnn.hidden);
        let left_state = self.left_ctx_rnn.forward(g, h0, &left, false)?.1;

        let hi = (position + self.max_right_words).min(n - 1);
        let right: Vec<Var> = (position + 1..=hi).map(need).collect::<Result<_>>()?;
        let h0 = g.zeros(self.right_ctx_rnn.hidden);
        let right_state = self.right_ctx_rnn.forward(g, h0, &right, true)?.1;

        let recent = &history[history.len().saturating_sub(self.max_left_words)..];
        let mut tags = Vec::with_capacity(recent.len());
        for item in recent {
            tags.push(self.embed_tag(g, item)?);
        }
        let h0 = g.zeros(self.tag_rnn.hidden);
        let tag_state = self.tag_rnn.forward(g, h0, &tags, false)?.1;

        let fused = g.concat(&[current, left_state, right_state, tag_state]);
        let h1 = self.fc1.forward(g, fused, Activation::Tanh)?;
        self.fc2.forward(g, h1, Activation::Tanh)
    }

    fn embed_tag(&self, g: &mut Graph, item: &TagInput) -> Result<Var> {
        if item.is_empty() {
            return Err(Error::input("empty tag history item"));
        }
        let rows = item
            .iter()
            .map(|r| g.row(self.tag_embedding, *r))
            .collect::<Result<Vec<_>>>()?;
        if rows.len() == 1 {
            Ok(rows[0])
        } else {
            g.sum(&rows)
        }
    }
}

/// A sentence with its subword pieces and gold tags, all word-aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub subword_ids: Vec<Vec<u32>>,
    pub tags: Vec<usize>,
}

impl TaggedSentence {
    pub fn new(words: Vec<String>, subword_ids: Vec<Vec<u32>>, tags: Vec<usize>) -> Result<Self> {
        if words.len() != subword_ids.len() || words.len() != tags.len() {
            return Err(Error::input(format!(
                "misaligned sentence: {} words, {} piece lists, {} tags",
                words.len(),
                subword_ids.len(),
                tags.len()
            )));
        }
        Ok(TaggedSentence {
            words,
            subword_ids,
            tags,
        })
    }
}

/// Run one optimizer step on the loss recorded by `build`; returns the loss
/// before the update. `None` from `build` skips the step.
pub(crate) fn train_step<F>(
    store: &mut ParamStore,
    adam: &mut AdamState,
    tc: &TrainConfig,
    lr: f64,
    build: F,
) -> Result<Option<f64>>
where
    F: FnOnce(&mut Graph) -> Result<Option<Var>>,
{
    let (loss, grads) = {
        let mut g = Graph::new(store);
        match build(&mut g)? {
            Some(l) => (g.scalar(l), g.backward(l)),
            None => return Ok(None),
        }
    };
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("training loss became {loss}")));
    }
    adam_update(adam, store, &grads, lr, tc)?;
    Ok(Some(loss))
}

/// Check that a loaded manifest has the expected kind.
pub(crate) fn expect_kind(m: &Manifest, kind: &str) -> Result<()> {
    if m.kind != kind {
        return Err(Error::data(None, format!("expected a {kind} model, found {}", m.kind)));
    }
    Ok(())
}

/// Context model with a linear classification head over `num_tags` tags.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextModel {
    pub config: ContextModelConfig,
    pub store: ParamStore,
    pub trunk: ContextTrunk,
    pub head: Dense,
}

impl ContextModel {
    pub fn new(config: ContextModelConfig, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        let trunk = ContextTrunk::new(&mut store, &config, config.num_tags, &mut rng)?;
        let head = Dense::new(&mut store, "head", config.fc2_units, config.num_tags, &mut rng)?;
        Ok(ContextModel {
            config,
            store,
            trunk,
            head,
        })
    }

    /// Train for `tc.epochs` epochs; returns the per-epoch mean losses.
    pub fn fit(
        &mut self,
        corpus: &[TaggedSentence],
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
        // Stored weights are f32; keep the in-memory model identical to a reloaded one.
        self.store.round_to_f32();
        Ok(losses)
    }

    pub fn save(&self, dir: &Path, kind: &str, extra: &[(String, String)]) -> Result<()> {
        let mut config = self.config.to_pairs();
        config.extend_from_slice(extra);
        save_model(dir, kind, &config, &self.store)
    }

    /// Load a model saved with `kind`; also returns the manifest so callers
    /// can read their extra entries.
    pub fn load(dir: &Path, kind: &str) -> Result<(Self, Manifest)> {
        let (manifest, store) = load_model(dir)?;
        expect_kind(&manifest, kind)?;
        let mut model = ContextModel::new(ContextModelConfig::from_manifest(&manifest)?, 0)?;
        restore_into(&mut model.store, &store)?;
        Ok((model, manifest))
    }

    /// Total number of scalars; the shared word GRU is counted once.
    pub fn count_params(&self) -> usize {
        self.store.count()
    }

    fn history(tags: &[usize]) -> Vec<TagInput> {
        tags.iter().map(|t| vec![*t]).collect()
    }

    fn logits_var(&self, g: &mut Graph, vecs: &[Option<Var>], position: usize, left_tags: &[usize]) -> Result<Var> {
        let h = self.trunk.fuse(g, vecs, position, &Self::history(left_tags))?;
        self.head.forward(g, h, Activation::None)
    }

    /// Logits for one word given the tags of the words before it.
    pub fn forward_word(&self, sentence: &[Vec<u32>], position: usize, left_tags: &[usize]) -> Result<Vec<f64>> {
        if position >= sentence.len() {
            return Err(Error::Range(format!(
                "position {position} in a {}-word sentence",
                sentence.len()
            )));
        }
        if left_tags.len() > position {
            return Err(Error::input("tag history is longer than the left context"));
        }
        let mut g = Graph::new(&self.store);
        let vecs = self.trunk.window_vectors(&mut g, sentence, position)?;
        let out = self.logits_var(&mut g, &vecs, position, left_tags)?;
        Ok(g.value(out).to_vec())
    }

    /// Logits at every position with the given tags fed as history.
    pub fn teacher_forced_logits(&self, sentence: &[Vec<u32>], tags: &[usize]) -> Result<Vec<Vec<f64>>> {
        if tags.len() != sentence.len() {
            return Err(Error::input("one tag per word is required"));
        }
        let mut g = Graph::new(&self.store);
        let vecs: Vec<Option<Var>> = self.trunk.word_vectors(&mut g, sentence)?.into_iter().map(Some).collect();
        (0..sentence.len())
            .map(|i| {
                let v = self.logits_var(&mut g, &vecs, i, &tags[..i])?;
                Ok(g.value(v).to_vec())
            })
            .collect()
    }

    /// Greedy left-to-right decoding; one tag per word.
    pub fn tag_sentence(&self, sentence: &[Vec<u32>]) -> Result<Vec<usize>> {
        if sentence.is_empty() {
            return Err(Error::input("cannot tag an empty sentence"));
        }
        let mut g = Graph::new(&self.store);
        let vecs: Vec<Option<Var>> = self.trunk.word_vectors(&mut g, sentence)?.into_iter().map(Some).collect();
        let mut tags = Vec::with_capacity(sentence.len());
        for i in 0..sentence.len() {
            let v = self.logits_var(&mut g, &vecs, i, &tags)?;
            tags.push(argmax(g.value(v)));
        }
        Ok(tags)
    }

    fn check_tags(&self, s: &TaggedSentence) -> Result<()> {
        if let Some(t) = s.tags.iter().find(|t| **t >= self.config.num_tags) {
            return Err(Error::data(None, format!("tag id {t} with {} tags", self.config.num_tags)));
        }
        Ok(())
    }

    /// Summed teacher-forced cross-entropy over a sentence and its gradient
    /// with respect to `store` (which must share this model's layout).
    pub fn sentence_loss(&self, store: &ParamStore, sentence: &TaggedSentence) -> Result<(f64, Gradients)> {
        self.check_tags(sentence)?;
        let mut g = Graph::new(store);
        let vecs: Vec<Option<Var>> = self
            .trunk
            .word_vectors(&mut g, &sentence.subword_ids)?
            .into_iter()
            .map(Some)
            .collect();
        let mut losses = Vec::new();
        for i in 0..sentence.tags.len() {
            let logits = self.logits_var(&mut g, &vecs, i, &sentence.tags[..i])?;
            losses.push(g.softmax_cross_entropy(logits, sentence.tags[i])?);
        }
        let total = g.sum(&losses)?;
        Ok((g.scalar(total), g.backward(total)))
    }

    /// Mean per-word loss without updating anything.
    pub fn mean_loss(&self, corpus: &[TaggedSentence]) -> Result<f64> {
        let mut total = 0.0;
        let mut words = 0;
        for s in corpus {
            total += self.sentence_loss(&self.store, s)?.0;
            words += s.tags.len();
        }
        Ok(total / words.max(1) as f64)
    }

    /// One pass over `corpus` with an optimizer step after every word.
    /// History tags are the gold tags. Returns the mean per-word loss.
    pub fn train_epoch(
        &mut self,
        corpus: &[TaggedSentence],
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
            self.check_tags(s)?;
            for i in 0..s.tags.len() {
                let (trunk, head) = (&self.trunk, &self.head);
                let loss = train_step(&mut self.store, adam, tc, lr, |g| {
                    let vecs = trunk.window_vectors(g, &s.subword_ids, i)?;
                    let h = trunk.fuse(g, &vecs, i, &Self::history(&s.tags[..i]))?;
                    let logits = head.forward(g, h, Activation::None)?;
                    Ok(Some(g.softmax_cross_entropy(logits, s.tags[i])?))
                })?;
                total += loss.unwrap_or(0.0);
                words += 1;
            }
        }
        Ok(total / words.max(1) as f64)
    }
}
