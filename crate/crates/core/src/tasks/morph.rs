//! Morphological analysis candidates, their context-driven disambiguation,
//! and stemming as a by-product.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use crate::context_model::{expect_kind, train_step, ContextModelConfig, ContextTrunk, TagInput};
use crate::error::{Error, Result};
use crate::neural::persist::{load_model, restore_into, save_model};
use crate::neural::{
    argmax, seeded_rng, Activation, AdamState, Dense, Gradients, Graph, GruParams, Init, ParamId, ParamStore,
    TrainConfig, Var,
};
use crate::normalizer::lower_case;
use crate::unigram::UnigramVocab;

use super::encode_words;

pub const UNKNOWN_POS: &str = "Unknown";
pub const UNK_TOKEN: &str = "<unk>";
pub const MANIFEST_KIND: &str = "morph_disambiguator";

const SHIPPED_LEXICON: &str = include_str!("../../assets/lexicon.tsv");

/// A root, its part of speech and its ordered inflectional tags.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MorphAnalysis {
    pub root: String,
    pub pos: String,
    pub tags: Vec<String>,
}

fn check_part(part: &str, what: &str) -> Result<()> {
    if part.is_empty() || part.contains('+') || part.chars().any(char::is_whitespace) {
        return Err(Error::input(format!("invalid {what} {part:?}")));
    }
    Ok(())
}

impl MorphAnalysis {
    pub fn new(root: &str, pos: &str, tags: &[&str]) -> Result<Self> {
        check_part(root, "root")?;
        check_part(pos, "part of speech")?;
        for t in tags {
            check_part(t, "tag")?;
        }
        Ok(MorphAnalysis {
            root: root.to_string(),
            pos: pos.to_string(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
        })
    }

    /// The reading used for words the lexicon does not know.
    pub fn fallback(word: &str) -> Self {
        MorphAnalysis {
            root: word.to_string(),
            pos: UNKNOWN_POS.to_string(),
            tags: Vec::new(),
        }
    }

    /// Parse `root+Pos+Tag1+Tag2...`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split('+');
        let root = parts.next().unwrap_or("");
        let pos = parts
            .next()
            .ok_or_else(|| Error::input(format!("analysis {text:?} has no part of speech")))?;
        let tags: Vec<&str> = parts.collect();
        MorphAnalysis::new(root, pos, &tags)
    }

    /// Part of speech followed by the tags; the candidate encoder's input.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.pos.as_str()).chain(self.tags.iter().map(String::as_str))
    }
}

impl fmt::Display for MorphAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.root, self.pos)?;
        for t in &self.tags {
            write!(f, "+{t}")?;
        }
        Ok(())
    }
}

/// Lexicon-backed analyzer: `surface<TAB>root<TAB>pos<TAB>tag1+tag2`, one
/// analysis per line, surfaces may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconAnalyzer {
    entries: BTreeMap<String, Vec<MorphAnalysis>>,
}

impl LexiconAnalyzer {
    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<MorphAnalysis>> = BTreeMap::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(Error::parse(lineno, "expected surface, root, pos and tags"));
            }
            let tags: Vec<&str> = match fields.get(3) {
                Some(t) if !t.is_empty() => t.split('+').collect(),
                _ => Vec::new(),
            };
            let analysis = MorphAnalysis::new(fields[1], fields[2], &tags)
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
            let list = entries.entry(lower_case(fields[0])).or_default();
            if !list.contains(&analysis) {
                list.push(analysis);
            }
        }
        Ok(LexiconAnalyzer { entries })
    }

    /// The small lexicon bundled with the library.
    pub fn shipped() -> Self {
        Self::load(SHIPPED_LEXICON.as_bytes()).expect("bundled lexicon parses")
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Every listed analysis of the lowercased word; never empty.
    pub fn analyze(&self, word: &str) -> Vec<MorphAnalysis> {
        match self.entries.get(&lower_case(word)) {
            Some(list) => list.clone(),
            None => vec![MorphAnalysis::fallback(word)],
        }
    }

    pub fn analyses(&self) -> impl Iterator<Item = &MorphAnalysis> {
        self.entries.values().flatten()
    }
}

/// A training sentence: candidate analyses per word and the gold choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphSentence {
    pub words: Vec<String>,
    pub subword_ids: Vec<Vec<u32>>,
    pub candidates: Vec<Vec<MorphAnalysis>>,
    pub gold: Vec<usize>,
}

impl MorphSentence {
    /// Candidates are the gold analysis, the listed alternatives and, when
    /// an analyzer is given, its analyses; sorted and deduplicated.
    pub fn new(
        words: Vec<String>,
        gold: Vec<MorphAnalysis>,
        alternatives: Vec<Vec<MorphAnalysis>>,
        analyzer: Option<&LexiconAnalyzer>,
        vocab: &UnigramVocab,
    ) -> Result<Self> {
        if words.len() != gold.len() || words.len() != alternatives.len() {
            return Err(Error::input("misaligned morphology sentence"));
        }
        let subword_ids = encode_words(vocab, &words)?;
        let mut candidates = Vec::with_capacity(words.len());
        let mut gold_ids = Vec::with_capacity(words.len());
        for ((w, g), alts) in words.iter().zip(&gold).zip(alternatives) {
            let mut set: BTreeSet<MorphAnalysis> = alts.into_iter().collect();
            set.insert(g.clone());
            if let Some(a) = analyzer {
                let found = a.analyze(w);
                if !(found.len() == 1 && found[0].pos == UNKNOWN_POS) {
                    set.extend(found);
                }
            }
            let list: Vec<MorphAnalysis> = set.into_iter().collect();
            gold_ids.push(list.iter().position(|c| c == g).unwrap_or(0));
            candidates.push(list);
        }
        Ok(MorphSentence {
            words,
            subword_ids,
            candidates,
            gold: gold_ids,
        })
    }
}

/// One sentence of a morphology corpus before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorphRecord {
    pub words: Vec<String>,
    pub gold: Vec<MorphAnalysis>,
    pub alternatives: Vec<Vec<MorphAnalysis>>,
}

impl MorphRecord {
    pub fn encode(&self, vocab: &UnigramVocab, analyzer: Option<&LexiconAnalyzer>) -> Result<MorphSentence> {
        MorphSentence::new(
            self.words.clone(),
            self.gold.clone(),
            self.alternatives.clone(),
            analyzer,
            vocab,
        )
    }
}

/// Read `surface<TAB>gold[<TAB>alternative...]` lines, blank line between
/// sentences, analyses written as `root+Pos+Tags`.
pub fn read_morph_records<R: BufRead>(source: R) -> Result<Vec<MorphRecord>> {
    let mut out = Vec::new();
    let mut cur = MorphRecord {
        words: Vec::new(),
        gold: Vec::new(),
        alternatives: Vec::new(),
    };
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            if !cur.words.is_empty() {
                out.push(cur.clone());
                cur.words.clear();
                cur.gold.clear();
                cur.alternatives.clear();
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields[0].is_empty() {
            return Err(Error::parse(lineno, "expected surface and gold analysis"));
        }
        let parse = |s: &str| MorphAnalysis::parse(s).map_err(|e| Error::parse(lineno, e.to_string()));
        cur.words.push(fields[0].to_string());
        cur.gold.push(parse(fields[1])?);
        cur.alternatives
            .push(fields[2..].iter().map(|f| parse(f)).collect::<Result<Vec<_>>>()?);
    }
    if !cur.words.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

pub fn read_morph_corpus<R: BufRead>(
    source: R,
    vocab: &UnigramVocab,
    analyzer: Option<&LexiconAnalyzer>,
) -> Result<Vec<MorphSentence>> {
    read_morph_records(source)?
        .iter()
        .map(|r| r.encode(vocab, analyzer))
        .collect()
}

/// `<unk>` followed by every distinct pos/tag token, sorted.
pub fn collect_tokens<'a, I>(analyses: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a MorphAnalysis>,
{
    let set: BTreeSet<&str> = analyses.into_iter().flat_map(|a| a.tokens()).collect();
    std::iter::once(UNK_TOKEN.to_string())
        .chain(set.into_iter().filter(|t| *t != UNK_TOKEN).map(str::to_string))
        .collect()
}

/// Layer layout of the disambiguator, independent of parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphNet {
    pub trunk: ContextTrunk,
    pub projection: Dense,
    pub candidate_embedding: ParamId,
    pub candidate_rnn: GruParams,
    token_index: HashMap<String, usize>,
}

impl MorphNet {
    pub fn token_ids(&self, analysis: &MorphAnalysis) -> TagInput {
        analysis
            .tokens()
            .map(|t| self.token_index.get(t).copied().unwrap_or(0))
            .collect()
    }

    fn candidate_vector(&self, g: &mut Graph, analysis: &MorphAnalysis) -> Result<Var> {
        let xs = self
            .token_ids(analysis)
            .into_iter()
            .map(|t| g.row(self.candidate_embedding, t))
            .collect::<Result<Vec<_>>>()?;
        let h0 = g.zeros(self.candidate_rnn.hidden);
        Ok(self.candidate_rnn.forward(g, h0, &xs, false)?.1)
    }

    /// Candidate scores at `position`: dot products of the projected context
    /// vector with each candidate encoding.
    fn scores(
        &self,
        g: &mut Graph,
        vecs: &[Option<Var>],
        position: usize,
        history: &[TagInput],
        candidates: &[MorphAnalysis],
    ) -> Result<Var> {
        if candidates.is_empty() {
            return Err(Error::input("a word needs at least one candidate analysis"));
        }
        let ctx = self.trunk.fuse(g, vecs, position, history)?;
        let proj = self.projection.forward(g, ctx, Activation::None)?;
        let mut scores = Vec::with_capacity(candidates.len());
        for c in candidates {
            let v = self.candidate_vector(g, c)?;
            scores.push(g.dot(proj, v)?);
        }
        g.stack(&scores)
    }

    fn history(&self, candidates: &[Vec<MorphAnalysis>], chosen: &[usize]) -> Result<Vec<TagInput>> {
        chosen
            .iter()
            .zip(candidates)
            .map(|(c, list)| {
                list.get(*c)
                    .map(|a| self.token_ids(a))
                    .ok_or_else(|| Error::data(None, format!("choice {c} among {} candidates", list.len())))
            })
            .collect()
    }
}

/// Context trunk scored against GRU encodings of candidate analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphDisambiguator {
    pub config: ContextModelConfig,
    pub tokens: Vec<String>,
    pub store: ParamStore,
    pub net: MorphNet,
}

impl MorphDisambiguator {
    /// `tokens` is the pos/tag vocabulary shared by the tag history and the
    /// candidate encoder; it must start with `<unk>`.
    pub fn new(config: ContextModelConfig, tokens: Vec<String>, seed: u64) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::config("token list must start with <unk>"));
        }
        let mut token_index = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if token_index.insert(t.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate token {t}")));
            }
        }
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        let trunk = ContextTrunk::new(&mut store, &config, tokens.len(), &mut rng)?;
        let c = &config;
        let projection = Dense::new(&mut store, "projection", c.fc2_units, c.tag_rnn_hidden, &mut rng)?;
        let candidate_embedding = store.add_init(
            "candidate_embedding",
            &[tokens.len(), c.tag_embed_dim],
            Init::Uniform(crate::embedding::INIT_RANGE),
            &mut rng,
        )?;
        let candidate_rnn = GruParams::new(&mut store, "candidate_rnn", c.tag_embed_dim, c.tag_rnn_hidden, &mut rng)?;
        Ok(MorphDisambiguator {
            config,
            tokens,
            store,
            net: MorphNet {
                trunk,
                projection,
                candidate_embedding,
                candidate_rnn,
                token_index,
            },
        })
    }

    pub fn count_params(&self) -> usize {
        self.store.count()
    }

    pub fn token_ids(&self, analysis: &MorphAnalysis) -> TagInput {
        self.net.token_ids(analysis)
    }

    /// Candidate scores per word with the given choices fed as history.
    pub fn teacher_forced_scores(
        &self,
        sentence: &[Vec<u32>],
        candidates: &[Vec<MorphAnalysis>],
        chosen: &[usize],
    ) -> Result<Vec<Vec<f64>>> {
        self.check_alignment(sentence, candidates)?;
        let mut g = Graph::new(&self.store);
        let vecs: Vec<Option<Var>> = self.net.trunk.word_vectors(&mut g, sentence)?.into_iter().map(Some).collect();
        let history = self.net.history(candidates, chosen)?;
        (0..sentence.len())
            .map(|i| {
                let s = self.net.scores(&mut g, &vecs, i, &history[..i], &candidates[i])?;
                Ok(g.value(s).to_vec())
            })
            .collect()
    }

    fn check_alignment(&self, sentence: &[Vec<u32>], candidates: &[Vec<MorphAnalysis>]) -> Result<()> {
        if sentence.is_empty() {
            return Err(Error::input("cannot disambiguate an empty sentence"));
        }
        if sentence.len() != candidates.len() {
            return Err(Error::input("one candidate list per word is required"));
        }
        Ok(())
    }

    /// Greedy left-to-right choice of one candidate index per word. Words
    /// with a single candidate take it.
    pub fn choose(&self, sentence: &[Vec<u32>], candidates: &[Vec<MorphAnalysis>]) -> Result<Vec<usize>> {
        self.check_alignment(sentence, candidates)?;
        let mut g = Graph::new(&self.store);
        let vecs: Vec<Option<Var>> = self.net.trunk.word_vectors(&mut g, sentence)?.into_iter().map(Some).collect();
        let mut history: Vec<TagInput> = Vec::with_capacity(sentence.len());
        let mut chosen = Vec::with_capacity(sentence.len());
        for (i, list) in candidates.iter().enumerate() {
            let pick = if list.len() == 1 {
                0
            } else {
                let s = self.net.scores(&mut g, &vecs, i, &history, list)?;
                argmax(g.value(s))
            };
            history.push(self.token_ids(&list[pick]));
            chosen.push(pick);
        }
        Ok(chosen)
    }

    /// Summed cross-entropy over ambiguous words, teacher-forced, and its
    /// gradient with respect to `store`.
    pub fn sentence_loss(&self, store: &ParamStore, s: &MorphSentence) -> Result<(f64, Gradients)> {
        self.check_alignment(&s.subword_ids, &s.candidates)?;
        let mut g = Graph::new(store);
        let vecs: Vec<Option<Var>> = self.net.trunk.word_vectors(&mut g, &s.subword_ids)?.into_iter().map(Some).collect();
        let history = self.net.history(&s.candidates, &s.gold)?;
        let mut losses = Vec::new();
        for i in 0..s.words.len() {
            if s.candidates[i].len() > 1 {
                let scores = self.net.scores(&mut g, &vecs, i, &history[..i], &s.candidates[i])?;
                losses.push(g.softmax_cross_entropy(scores, s.gold[i])?);
            }
        }
        if losses.is_empty() {
            return Ok((0.0, Gradients::zeros_like(store)));
        }
        let total = g.sum(&losses)?;
        Ok((g.scalar(total), g.backward(total)))
    }

    /// One pass with an optimizer step per ambiguous word; returns the mean
    /// loss over ambiguous words.
    pub fn train_epoch(
        &mut self,
        corpus: &[MorphSentence],
        tc: &TrainConfig,
        adam: &mut AdamState,
        epoch: usize,
    ) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::input("training corpus is empty"));
        }
        let lr = tc.lr_at(epoch);
        let mut total = 0.0;
        let mut count = 0;
        for s in corpus {
            self.check_alignment(&s.subword_ids, &s.candidates)?;
            let history = self.net.history(&s.candidates, &s.gold)?;
            for i in 0..s.words.len() {
                if s.candidates[i].len() < 2 {
                    continue;
                }
                let net = &self.net;
                let loss = train_step(&mut self.store, adam, tc, lr, |g| {
                    let vecs = net.trunk.window_vectors(g, &s.subword_ids, i)?;
                    let scores = net.scores(g, &vecs, i, &history[..i], &s.candidates[i])?;
                    Ok(Some(g.softmax_cross_entropy(scores, s.gold[i])?))
                })?;
                total += loss.unwrap_or(0.0);
                count += 1;
            }
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }

    pub fn fit(
        &mut self,
        corpus: &[MorphSentence],
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
        let mut config = self.config.to_pairs();
        config.push(("tokens".to_string(), self.tokens.join(" ")));
        save_model(dir, MANIFEST_KIND, &config, &self.store)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (manifest, store) = load_model(dir)?;
        expect_kind(&manifest, MANIFEST_KIND)?;
        let tokens = manifest.require("tokens")?.split(' ').map(str::to_string).collect();
        let mut model = MorphDisambiguator::new(ContextModelConfig::from_manifest(&manifest)?, tokens, 0)?;
        restore_into(&mut model.store, &store)?;
        Ok(model)
    }
}

/// The chosen analysis for every word.
pub fn disambiguate<S: AsRef<str>>(
    model: &MorphDisambiguator,
    words: &[S],
    analyzer: &LexiconAnalyzer,
    vocab: &UnigramVocab,
) -> Result<Vec<MorphAnalysis>> {
    let ids = encode_words(vocab, words)?;
    let candidates: Vec<Vec<MorphAnalysis>> = words.iter().map(|w| analyzer.analyze(w.as_ref())).collect();
    let chosen = model.choose(&ids, &candidates)?;
    Ok(candidates
        .into_iter()
        .zip(chosen)
        .map(|(mut list, c)| list.swap_remove(c))
        .collect())
}

/// Roots of the disambiguated analyses.
pub fn stem<S: AsRef<str>>(
    model: &MorphDisambiguator,
    words: &[S],
    analyzer: &LexiconAnalyzer,
    vocab: &UnigramVocab,
) -> Result<Vec<String>> {
    Ok(disambiguate(model, words, analyzer, vocab)?
        .into_iter()
        .map(|a| a.root)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_parse() {
        let a = MorphAnalysis::new("baş", "Noun", &["A3sg", "Pnon", "Ins"]).unwrap();
        assert_eq!(a.to_string(), "baş+Noun+A3sg+Pnon+Ins");
        assert_eq!(MorphAnalysis::parse(&a.to_string()).unwrap(), a);
        assert_eq!(MorphAnalysis::parse("şimdi+Adv").unwrap().tags.len(), 0);
        assert!(MorphAnalysis::parse("yalnız").is_err());
        assert!(MorphAnalysis::parse("+Noun").is_err());
    }

    #[test]
    fn shipped_lexicon_readings_of_basla() {
        let lex = LexiconAnalyzer::shipped();
        let found: Vec<String> = lex.analyze("başla").iter().map(|a| a.to_string()).collect();
        assert_eq!(found, ["baş+Noun+A3sg+Pnon+Ins", "başla+Verb+Pos+Imp+A2sg"]);
        assert_eq!(lex.analyze("Başla").len(), 2);
        assert_eq!(lex.analyze("zzz"), vec![MorphAnalysis::fallback("zzz")]);
        assert_eq!(lex.analyze("geldi")[0].to_string(), "gel+Verb+Pos+Past+A3sg");
    }

    #[test]
    fn lexicon_errors_carry_lines() {
        let err = LexiconAnalyzer::load("a\tb\tNoun\n\nc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn token_collection() {
        let lex = LexiconAnalyzer::shipped();
        let tokens = collect_tokens(lex.analyses());
        assert_eq!(tokens[0], UNK_TOKEN);
        assert!(tokens.contains(&"Ins".to_string()));
        let mut rest = tokens[1..].to_vec();
        rest.sort();
        rest.dedup();
        assert_eq!(rest, tokens[1..]);
    }
}
