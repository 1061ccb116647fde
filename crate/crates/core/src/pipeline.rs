//! Task-level composition: parsed corpora, vocabulary training, model
//! training, evaluation and model directories.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use crate::context_model::{ContextModel, ContextModelConfig, TaggedSentence};
use crate::corpus::{accuracy, f1_macro, las_uas, read_conllu, read_ner_io, read_sentiment_tsv, ConlluSentence};
use crate::error::{Error, Result};
use crate::neural::persist::load_manifest;
use crate::neural::TrainConfig;
use crate::sentiment::{decide, Sentiment, SentimentConfig, SentimentExample, SentimentModel};
use crate::tasks::dep::{DepArc, DepParser, DepParserConfig, DepSentence};
use crate::tasks::morph::{collect_tokens, read_morph_records, LexiconAnalyzer, MorphDisambiguator, MorphRecord, MorphSentence};
use crate::tasks::{encode_words, TagSet, NER_TAGS, POS_TAGS};
use crate::unigram::{train_unigram, TrainerConfig, UnigramVocab};

pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Ner,
    Pos,
    Morph,
    Dep,
    Sentiment,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Ner, Task::Pos, Task::Morph, Task::Dep, Task::Sentiment];

    /// Manifest kind written by models of this task.
    pub fn kind(self) -> &'static str {
        match self {
            Task::Ner => "ner",
            Task::Pos => "pos",
            Task::Morph => crate::tasks::morph::MANIFEST_KIND,
            Task::Dep => crate::tasks::dep::MANIFEST_KIND,
            Task::Sentiment => crate::sentiment::MANIFEST_KIND,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Ner => "ner",
            Task::Pos => "pos",
            Task::Morph => "morph",
            Task::Dep => "dep",
            Task::Sentiment => "sentiment",
        }
    }

    fn tag_set(self) -> Option<TagSet> {
        match self {
            Task::Ner => Some(NER_TAGS),
            Task::Pos => Some(POS_TAGS),
            _ => None,
        }
    }

    fn from_kind(kind: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.kind() == kind)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::input(format!("unknown task {s:?}")))
    }
}

/// A parsed corpus in the task's file format.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Ner(Vec<(Vec<String>, Vec<String>)>),
    Pos(Vec<ConlluSentence>),
    Dep(Vec<ConlluSentence>),
    Morph(Vec<MorphRecord>),
    Sentiment(Vec<(String, bool)>),
}

impl Dataset {
    pub fn parse(task: Task, text: &str) -> Result<Self> {
        let src = text.as_bytes();
        let data = match task {
            Task::Ner => Dataset::Ner(read_ner_io(src)?),
            Task::Pos => Dataset::Pos(read_conllu(src)?),
            Task::Dep => Dataset::Dep(read_conllu(src)?),
            Task::Morph => Dataset::Morph(read_morph_records(src)?),
            Task::Sentiment => Dataset::Sentiment(read_sentiment_tsv(src)?),
        };
        if data.is_empty() {
            return Err(Error::data(None, "corpus has no examples"));
        }
        Ok(data)
    }

    pub fn read(task: Task, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Dataset::parse(task, &text)
    }

    pub fn task(&self) -> Task {
        match self {
            Dataset::Ner(_) => Task::Ner,
            Dataset::Pos(_) => Task::Pos,
            Dataset::Dep(_) => Task::Dep,
            Dataset::Morph(_) => Task::Morph,
            Dataset::Sentiment(_) => Task::Sentiment,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Ner(d) => d.len(),
            Dataset::Pos(d) | Dataset::Dep(d) => d.len(),
            Dataset::Morph(d) => d.len(),
            Dataset::Sentiment(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input word sequences, one per example.
    pub fn sentences(&self) -> Vec<Vec<String>> {
        match self {
            Dataset::Ner(d) => d.iter().map(|(w, _)| w.clone()).collect(),
            Dataset::Pos(d) | Dataset::Dep(d) => d.iter().map(|s| s.forms.clone()).collect(),
            Dataset::Morph(d) => d.iter().map(|r| r.words.clone()).collect(),
            Dataset::Sentiment(d) => d
                .iter()
                .map(|(t, _)| t.split_whitespace().map(str::to_string).collect())
                .collect(),
        }
    }

    /// Distinct dependency labels, sorted.
    pub fn dep_labels(&self) -> Vec<String> {
        match self {
            Dataset::Dep(d) => d
                .iter()
                .flat_map(|s| s.deprels.iter().cloned())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Train a subword vocabulary on every word of `datasets`.
pub fn train_vocab(datasets: &[&Dataset], target_size: usize) -> Result<UnigramVocab> {
    let words = datasets
        .iter()
        .flat_map(|d| d.sentences())
        .flatten()
        .map(|w| (w, 1u64));
    train_unigram(
        words,
        &TrainerConfig {
            target_size,
            ..TrainerConfig::default()
        },
    )
}

/// Layer sizes for every task; vocabulary size and output widths are
/// filled in from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSizes {
    pub context: ContextModelConfig,
    pub sentiment: SentimentConfig,
    pub max_sentence_len: usize,
}

impl Default for ModelSizes {
    fn default() -> Self {
        ModelSizes {
            context: ContextModelConfig::default(),
            sentiment: SentimentConfig::default(),
            max_sentence_len: 64,
        }
    }
}

impl ModelSizes {
    /// Small layers for corpora of a few dozen sentences.
    pub fn toy() -> Self {
        let d = 24;
        ModelSizes {
            context: ContextModelConfig {
                subword_embed_dim: d,
                word_rnn_hidden: d,
                left_ctx_hidden: d,
                right_ctx_hidden: d,
                tag_embed_dim: 8,
                tag_rnn_hidden: 8,
                fc1_units: 2 * d,
                fc2_units: d,
                ..ContextModelConfig::default()
            },
            sentiment: SentimentConfig {
                subword_embed_dim: d,
                rnn_hidden: d,
                fc_units: d,
                ..SentimentConfig::default()
            },
            max_sentence_len: 64,
        }
    }
}

/// Training settings that reach zero training error on the toy corpora.
pub fn toy_train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.02,
        epochs,
        ..TrainConfig::default()
    }
}

/// Examples encoded for one model.
#[derive(Debug, Clone, PartialEq)]
pub enum Prepared {
    Tagged(Task, Vec<TaggedSentence>),
    Morph(Vec<MorphSentence>),
    Dep(Vec<DepSentence>),
    Sentiment(Vec<SentimentExample>),
}

impl Prepared {
    pub fn len(&self) -> usize {
        match self {
            Prepared::Tagged(_, d) => d.len(),
            Prepared::Morph(d) => d.len(),
            Prepared::Dep(d) => d.len(),
            Prepared::Sentiment(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Encode `data`. `labels` fixes the dependency label ids; gold labels
/// outside it get ids past the end, which no parser predicts.
pub fn prepare(data: &Dataset, vocab: &UnigramVocab, analyzer: &LexiconAnalyzer, labels: &[String]) -> Result<Prepared> {
    Ok(match data {
        Dataset::Ner(d) => Prepared::Tagged(
            Task::Ner,
            d.iter()
                .map(|(w, t)| {
                    let ids = t.iter().map(|x| NER_TAGS.require(x, None)).collect::<Result<Vec<_>>>()?;
                    TaggedSentence::new(w.clone(), encode_words(vocab, w)?, ids)
                })
                .collect::<Result<_>>()?,
        ),
        Dataset::Pos(d) => Prepared::Tagged(
            Task::Pos,
            d.iter()
                .map(|s| {
                    let ids = s.upos.iter().map(|x| POS_TAGS.require(x, None)).collect::<Result<Vec<_>>>()?;
                    TaggedSentence::new(s.forms.clone(), encode_words(vocab, &s.forms)?, ids)
                })
                .collect::<Result<_>>()?,
        ),
        Dataset::Dep(d) => {
            let mut extra: Vec<String> = Vec::new();
            let mut label_id = |name: &str| {
                labels.iter().position(|l| l == name).unwrap_or_else(|| {
                    let k = extra.iter().position(|l| l == name).unwrap_or_else(|| {
                        extra.push(name.to_string());
                        extra.len() - 1
                    });
                    labels.len() + k
                })
            };
            let mut out = Vec::with_capacity(d.len());
            for s in d {
                let arcs = s
                    .heads
                    .iter()
                    .zip(&s.deprels)
                    .map(|(h, r)| DepArc {
                        head: *h,
                        label: label_id(r),
                    })
                    .collect();
                out.push(DepSentence::new(s.forms.clone(), encode_words(vocab, &s.forms)?, arcs)?);
            }
            Prepared::Dep(out)
        }
        Dataset::Morph(d) => Prepared::Morph(
            d.iter()
                .map(|r| r.encode(vocab, Some(analyzer)))
                .collect::<Result<_>>()?,
        ),
        Dataset::Sentiment(d) => Prepared::Sentiment(
            d.iter()
                .map(|(t, l)| SentimentExample::encode(t, *l, vocab))
                .collect::<Result<_>>()?,
        ),
    })
}

/// A trained model of any task.
#[derive(Debug, Clone)]
pub enum TaskModel {
    Tagger(Task, ContextModel),
    Morph(MorphDisambiguator),
    Dep(DepParser),
    Sentiment(SentimentModel),
}

/// Build a fresh model for `data` and train it. Returns the model and the
/// per-epoch mean losses.
pub fn train(
    data: &Dataset,
    vocab: &UnigramVocab,
    analyzer: &LexiconAnalyzer,
    sizes: &ModelSizes,
    tc: &TrainConfig,
    seed: u64,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<(TaskModel, Vec<f64>)> {
    let labels = data.dep_labels();
    let prepared = prepare(data, vocab, analyzer, &labels)?;
    let mut context = sizes.context.clone();
    context.vocab_size = vocab.len();
    match prepared {
        Prepared::Tagged(task, corpus) => {
            context.num_tags = task.tag_set().map_or(1, |t| t.len());
            let mut m = ContextModel::new(context, seed)?;
            let losses = m.fit(&corpus, tc, on_epoch)?;
            Ok((TaskModel::Tagger(task, m), losses))
        }
        Prepared::Morph(corpus) => {
            let tokens = collect_tokens(
                corpus
                    .iter()
                    .flat_map(|s| s.candidates.iter().flatten())
                    .chain(analyzer.analyses()),
            );
            context.num_tags = 1;
            let mut m = MorphDisambiguator::new(context, tokens, seed)?;
            let losses = m.fit(&corpus, tc, on_epoch)?;
            Ok((TaskModel::Morph(m), losses))
        }
        Prepared::Dep(corpus) => {
            context.num_tags = 1;
            let config = DepParserConfig {
                max_sentence_len: sizes.max_sentence_len,
                ..DepParserConfig::new(context, labels.len())
            };
            let mut m = DepParser::new(config, labels, seed)?;
            let losses = m.fit(&corpus, tc, on_epoch)?;
            Ok((TaskModel::Dep(m), losses))
        }
        Prepared::Sentiment(corpus) => {
            let config = SentimentConfig {
                vocab_size: vocab.len(),
                ..sizes.sentiment.clone()
            };
            let mut m = SentimentModel::new(config, seed)?;
            let losses = m.fit(&corpus, tc, on_epoch)?;
            Ok((TaskModel::Sentiment(m), losses))
        }
    }
}

/// Per-example predictions in printable form.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Tags(Vec<String>),
    Arcs(Vec<(usize, String)>),
    Label(Sentiment, f64),
}

impl TaskModel {
    pub fn task(&self) -> Task {
        match self {
            TaskModel::Tagger(t, _) => *t,
            TaskModel::Morph(_) => Task::Morph,
            TaskModel::Dep(_) => Task::Dep,
            TaskModel::Sentiment(_) => Task::Sentiment,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        match self {
            TaskModel::Tagger(t, m) => m.save(dir, t.kind(), &[]),
            TaskModel::Morph(m) => m.save(dir),
            TaskModel::Dep(m) => m.save(dir),
            TaskModel::Sentiment(m) => m.save(dir),
        }
    }

    /// Load whichever model `dir` holds.
    pub fn load(dir: &Path) -> Result<Self> {
        let kind = load_manifest(dir)?.kind;
        let task = Task::from_kind(&kind).ok_or_else(|| Error::data(None, format!("unknown model kind {kind}")))?;
        Ok(match task {
            Task::Ner | Task::Pos => TaskModel::Tagger(task, ContextModel::load(dir, task.kind())?.0),
            Task::Morph => TaskModel::Morph(MorphDisambiguator::load(dir)?),
            Task::Dep => TaskModel::Dep(DepParser::load(dir)?),
            Task::Sentiment => TaskModel::Sentiment(SentimentModel::load(dir)?),
        })
    }

    pub fn count_params(&self) -> usize {
        match self {
            TaskModel::Tagger(_, m) => m.count_params(),
            TaskModel::Morph(m) => m.count_params(),
            TaskModel::Dep(m) => m.count_params(),
            TaskModel::Sentiment(m) => m.count_params(),
        }
    }

    /// Predict one input: a word list, or for sentiment a list of tokens
    /// joined back into text.
    pub fn predict<S: AsRef<str>>(
        &self,
        words: &[S],
        vocab: &UnigramVocab,
        analyzer: &LexiconAnalyzer,
        threshold: f64,
    ) -> Result<Prediction> {
        Ok(match self {
            TaskModel::Tagger(t, m) => {
                let set = t.tag_set().expect("taggers have a tag set");
                let ids = m.tag_sentence(&encode_words(vocab, words)?)?;
                Prediction::Tags(ids.into_iter().map(|i| set.names()[i].to_string()).collect())
            }
            TaskModel::Morph(m) => Prediction::Tags(
                crate::tasks::morph::disambiguate(m, words, analyzer, vocab)?
                    .iter()
                    .map(ToString::to_string)
                    .collect(),
            ),
            TaskModel::Dep(m) => Prediction::Arcs(
                crate::tasks::dep::parse_dependencies(m, words, vocab)?
                    .into_iter()
                    .map(|a| (a.head, m.labels[a.label].clone()))
                    .collect(),
            ),
            TaskModel::Sentiment(m) => {
                let text: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
                let (s, p) = m.classify(&text.join(" "), vocab, threshold)?;
                Prediction::Label(s, p)
            }
        })
    }

    /// Every raw model output on `data` (teacher-forced logits, candidate
    /// scores, parser activations or probabilities) followed by the
    /// predicted ids, flattened. Two models with equal outputs here behave
    /// identically on `data`.
    pub fn outputs(&self, data: &Prepared) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        match (self, data) {
            (TaskModel::Tagger(_, m), Prepared::Tagged(_, d)) => {
                for s in d {
                    out.extend(m.teacher_forced_logits(&s.subword_ids, &s.tags)?.concat());
                    out.extend(m.tag_sentence(&s.subword_ids)?.into_iter().map(|t| t as f64));
                }
            }
            (TaskModel::Morph(m), Prepared::Morph(d)) => {
                for s in d {
                    out.extend(m.teacher_forced_scores(&s.subword_ids, &s.candidates, &s.gold)?.concat());
                    out.extend(m.choose(&s.subword_ids, &s.candidates)?.into_iter().map(|t| t as f64));
                }
            }
            (TaskModel::Dep(m), Prepared::Dep(d)) => {
                for s in d {
                    out.extend(m.teacher_forced_outputs(&s.subword_ids, &s.arcs)?.concat());
                    for a in m.parse_encoded(&s.subword_ids)? {
                        out.extend([a.head as f64, a.label as f64]);
                    }
                }
            }
            (TaskModel::Sentiment(m), Prepared::Sentiment(d)) => {
                for ex in d {
                    out.push(m.probability(&ex.ids)?);
                }
            }
            _ => return Err(Error::input("data does not match the model's task")),
        }
        Ok(out)
    }

    /// Named scores of the model on `data`. Taggers report token accuracy and
    /// macro F1; the disambiguator reports accuracy over ambiguous words and
    /// all words; the parser reports LAS and UAS; sentiment reports accuracy
    /// and macro F1 at `threshold`.
    pub fn evaluate(&self, data: &Prepared, threshold: f64) -> Result<Vec<(&'static str, f64)>> {
        match (self, data) {
            (TaskModel::Tagger(_, m), Prepared::Tagged(_, d)) => {
                let mut gold = Vec::new();
                let mut pred = Vec::new();
                for s in d {
                    gold.extend_from_slice(&s.tags);
                    pred.extend(m.tag_sentence(&s.subword_ids)?);
                }
                Ok(vec![("accuracy", accuracy(&gold, &pred)?), ("f1_macro", f1_macro(&gold, &pred)?)])
            }
            (TaskModel::Morph(m), Prepared::Morph(d)) => {
                let (mut amb, mut amb_ok, mut all, mut all_ok) = (0usize, 0usize, 0usize, 0usize);
                for s in d {
                    let chosen = m.choose(&s.subword_ids, &s.candidates)?;
                    for ((c, g), cands) in chosen.iter().zip(&s.gold).zip(&s.candidates) {
                        all += 1;
                        all_ok += usize::from(c == g);
                        if cands.len() > 1 {
                            amb += 1;
                            amb_ok += usize::from(c == g);
                        }
                    }
                }
                let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
                Ok(vec![
                    ("ambiguous_accuracy", ratio(amb_ok, amb)),
                    ("accuracy", ratio(all_ok, all)),
                ])
            }
            (TaskModel::Dep(m), Prepared::Dep(d)) => {
                let gold: Vec<Vec<DepArc>> = d.iter().map(|s| s.arcs.clone()).collect();
                let pred = d
                    .iter()
                    .map(|s| m.parse_encoded(&s.subword_ids))
                    .collect::<Result<Vec<_>>>()?;
                let (las, uas) = las_uas(&gold, &pred)?;
                Ok(vec![("LAS", las), ("UAS", uas)])
            }
            (TaskModel::Sentiment(m), Prepared::Sentiment(d)) => {
                let gold: Vec<bool> = d.iter().map(|e| e.label).collect();
                let pred = d
                    .iter()
                    .map(|e| Ok(decide(m.probability(&e.ids)?, threshold) == Sentiment::Positive))
                    .collect::<Result<Vec<_>>>()?;
                Ok(vec![("accuracy", accuracy(&gold, &pred)?), ("f1_macro", f1_macro(&gold, &pred)?)])
            }
            _ => Err(Error::input("data does not match the model's task")),
        }
    }

    /// Dependency labels known to the model (empty for other tasks).
    pub fn dep_labels(&self) -> &[String] {
        match self {
            TaskModel::Dep(m) => &m.labels,
            _ => &[],
        }
    }
}

/// Write the model and its vocabulary into `dir`.
pub fn save_bundle(dir: &Path, model: &TaskModel, vocab: &UnigramVocab) -> Result<()> {
    model.save(dir)?;
    vocab.save(fs::File::create(dir.join(VOCAB_FILE))?)
}

pub fn load_bundle(dir: &Path) -> Result<(TaskModel, UnigramVocab)> {
    let model = TaskModel::load(dir)?;
    let vocab = UnigramVocab::load(BufReader::new(fs::File::open(dir.join(VOCAB_FILE))?))?;
    if vocab.len() != vocab_size_of(&model) {
        return Err(Error::data(None, "vocabulary does not match the model"));
    }
    Ok((model, vocab))
}

fn vocab_size_of(model: &TaskModel) -> usize {
    match model {
        TaskModel::Tagger(_, m) => m.config.vocab_size,
        TaskModel::Morph(m) => m.config.vocab_size,
        TaskModel::Dep(m) => m.config.context.vocab_size,
        TaskModel::Sentiment(m) => m.config.vocab_size,
    }
}
