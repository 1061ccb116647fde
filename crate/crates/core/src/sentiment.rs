//! Binary sentiment classifier: stacked bidirectional GRUs over a flat
//! subword sequence, mean pooled, then a tanh layer and a sigmoid output.

use std::fmt;
use std::path::Path;

use crate::context_model::{expect_kind, train_step};
use crate::error::{Error, Result};
use crate::neural::persist::{load_model, restore_into, save_model};
use crate::neural::{
    bigru_forward, seeded_rng, Activation, AdamState, Dense, Gradients, Graph, GruParams, Init, ParamId, ParamStore,
    TrainConfig, Var,
};
use crate::unigram::UnigramVocab;

pub const MANIFEST_KIND: &str = "sentiment";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentConfig {
    pub subword_embed_dim: usize,
    pub rnn_hidden: usize,
    pub num_bigru_layers: usize,
    pub fc_units: usize,
    pub vocab_size: usize,
    pub max_tokens: usize,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            subword_embed_dim: 32,
            rnn_hidden: 32,
            num_bigru_layers: 2,
            fc_units: 32,
            vocab_size: 2004,
            max_tokens: 256,
        }
    }
}

impl SentimentConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.subword_embed_dim,
            self.rnn_hidden,
            self.num_bigru_layers,
            self.fc_units,
            self.vocab_size,
            self.max_tokens,
        ];
        if dims.contains(&0) {
            return Err(Error::config("sentiment dimensions must all be positive"));
        }
        Ok(())
    }

    fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("subword_embed_dim", self.subword_embed_dim),
            ("rnn_hidden", self.rnn_hidden),
            ("num_bigru_layers", self.num_bigru_layers),
            ("fc_units", self.fc_units),
            ("vocab_size", self.vocab_size),
            ("max_tokens", self.max_tokens),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sentiment {
    Positive,
    Negative,
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sentiment::Positive => "positive",
            Sentiment::Negative => "negative",
        })
    }
}

/// Positive iff `p >= threshold`.
pub fn decide(p: f64, threshold: f64) -> Sentiment {
    if p >= threshold {
        Sentiment::Positive
    } else {
        Sentiment::Negative
    }
}

/// A tokenized training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentExample {
    pub ids: Vec<u32>,
    pub label: bool,
}

impl SentimentExample {
    pub fn encode(text: &str, label: bool, vocab: &UnigramVocab) -> Result<Self> {
        let ids = vocab.encode_flat(text);
        if ids.is_empty() {
            return Err(Error::input("text has no tokens"));
        }
        Ok(SentimentExample { ids, label })
    }
}

/// Layer layout, independent of parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentNet {
    pub embedding: ParamId,
    /// Forward and backward GRU of each stacked layer.
    pub layers: Vec<(GruParams, GruParams)>,
    pub fc: Dense,
    pub head: Dense,
    pub max_tokens: usize,
}

impl SentimentNet {
    fn forward(&self, g: &mut Graph, ids: &[u32]) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::input("text has no tokens"));
        }
        let ids = &ids[..ids.len().min(self.max_tokens)];
        let mut seq = ids
            .iter()
            .map(|id| g.row(self.embedding, *id as usize))
            .collect::<Result<Vec<_>>>()?;
        for (fwd, bwd) in &self.layers {
            seq = bigru_forward(g, fwd, bwd, &seq)?;
        }
        let pooled = g.mean(&seq)?;
        let h = self.fc.forward(g, pooled, Activation::Tanh)?;
        self.head.forward(g, h, Activation::Sigmoid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentModel {
    pub config: SentimentConfig,
    pub store: ParamStore,
    pub net: SentimentNet,
}

impl SentimentModel {
    pub fn new(config: SentimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        let embedding = store.add_init(
            "embedding",
            &[c.vocab_size, c.subword_embed_dim],
            Init::Uniform(crate::embedding::INIT_RANGE),
            &mut rng,
        )?;
        let mut layers = Vec::with_capacity(c.num_bigru_layers);
        let mut input = c.subword_embed_dim;
        for l in 0..c.num_bigru_layers {
            let fwd = GruParams::new(&mut store, &format!("bigru{l}.fwd"), input, c.rnn_hidden, &mut rng)?;
            let bwd = GruParams::new(&mut store, &format!("bigru{l}.bwd"), input, c.rnn_hidden, &mut rng)?;
            layers.push((fwd, bwd));
            input = 2 * c.rnn_hidden;
        }
        let fc = Dense::new(&mut store, "fc", input, c.fc_units, &mut rng)?;
        let head = Dense::new(&mut store, "head", c.fc_units, 1, &mut rng)?;
        let max_tokens = c.max_tokens;
        Ok(SentimentModel {
            config,
            store,
            net: SentimentNet {
                embedding,
                layers,
                fc,
                head,
                max_tokens,
            },
        })
    }

    pub fn count_params(&self) -> usize {
        self.store.count()
    }

    /// Probability of the positive class for a token sequence.
    pub fn probability(&self, ids: &[u32]) -> Result<f64> {
        let mut g = Graph::new(&self.store);
        let p = self.net.forward(&mut g, ids)?;
        Ok(g.scalar(p))
    }

    pub fn forward(&self, text: &str, vocab: &UnigramVocab) -> Result<f64> {
        let ids = vocab.encode_flat(text);
        if ids.is_empty() {
            return Err(Error::input("empty text"));
        }
        self.probability(&ids)
    }

    pub fn classify(&self, text: &str, vocab: &UnigramVocab, threshold: f64) -> Result<(Sentiment, f64)> {
        let p = self.forward(text, vocab)?;
        Ok((decide(p, threshold), p))
    }

    /// Binary cross-entropy of one example and its gradient.
    pub fn example_loss(&self, store: &ParamStore, ex: &SentimentExample) -> Result<(f64, Gradients)> {
        let mut g = Graph::new(store);
        let p = self.net.forward(&mut g, &ex.ids)?;
        let loss = g.binary_cross_entropy(p, &[if ex.label { 1.0 } else { 0.0 }])?;
        Ok((g.scalar(loss), g.backward(loss)))
    }

    pub fn mean_loss(&self, corpus: &[SentimentExample]) -> Result<f64> {
        let mut total = 0.0;
        for ex in corpus {
            total += self.example_loss(&self.store, ex)?.0;
        }
        Ok(total / corpus.len().max(1) as f64)
    }

    /// One pass in corpus order with an optimizer step per example.
    pub fn train_epoch(
        &mut self,
        corpus: &[SentimentExample],
        tc: &TrainConfig,
        adam: &mut AdamState,
        epoch: usize,
    ) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::input("training corpus is empty"));
        }
        let lr = tc.lr_at(epoch);
        let mut total = 0.0;
        for ex in corpus {
            let net = &self.net;
            let target = [if ex.label { 1.0 } else { 0.0 }];
            let loss = train_step(&mut self.store, adam, tc, lr, |g| {
                let p = net.forward(g, &ex.ids)?;
                Ok(Some(g.binary_cross_entropy(p, &target)?))
            })?;
            total += loss.unwrap_or(0.0);
        }
        Ok(total / corpus.len() as f64)
    }

    /// Train for `tc.epochs` epochs; returns the per-epoch mean losses.
    pub fn fit(
        &mut self,
        corpus: &[SentimentExample],
        tc: &TrainConfig,
        on_epoch: &mut dyn FnMut(usize, f64),
    ) -> Result<Vec<f64>> {
        tc.validate()?;
        if corpus.is_empty() {
            return Err(Error::input("training corpus is empty"));
        }
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
        save_model(dir, MANIFEST_KIND, &self.config.to_pairs(), &self.store)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (m, store) = load_model(dir)?;
        expect_kind(&m, MANIFEST_KIND)?;
        let config = SentimentConfig {
            subword_embed_dim: m.parse_usize("subword_embed_dim")?,
            rnn_hidden: m.parse_usize("rnn_hidden")?,
            num_bigru_layers: m.parse_usize("num_bigru_layers")?,
            fc_units: m.parse_usize("fc_units")?,
            vocab_size: m.parse_usize("vocab_size")?,
            max_tokens: m.parse_usize("max_tokens")?,
        };
        let mut model = SentimentModel::new(config, 0)?;
        restore_into(&mut model.store, &store)?;
        Ok(model)
    }
}

/// Train on `(text, label)` pairs, tokenizing each text as a flat sequence.
pub fn train_sentiment(
    model: &mut SentimentModel,
    corpus: &[(String, bool)],
    vocab: &UnigramVocab,
    tc: &TrainConfig,
) -> Result<Vec<f64>> {
    let examples = corpus
        .iter()
        .map(|(t, l)| SentimentExample::encode(t, *l, vocab))
        .collect::<Result<Vec<_>>>()?;
    model.fit(&examples, tc, &mut |_, _| {})
}
