//! The `tnlp` command line: argument grammar, dispatch and exit codes.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when input data
//! is missing or malformed. Results go to the output stream, diagnostics
//! to the error stream.

mod models;
mod text;

use std::ffi::OsString;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::Value;

/// Environment variable naming the default model root.
pub const MODEL_DIR_ENV: &str = "VNLP_MODEL_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: no such file or directory", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", .path.display())]
    File { path: PathBuf, source: tnlp::Error },
    #[error(transparent)]
    Lib(#[from] tnlp::Error),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "tnlp", version, about = "Turkish NLP toolkit")]
pub struct Cli {
    /// Seed for every stochastic component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Emit one JSON object per output line.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArg {
    /// Read from this file instead of standard input.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One sentence per output line.
    SplitSentences {
        /// Non-breaking prefix list replacing the bundled one.
        #[arg(long)]
        abbrev: Option<PathBuf>,
        #[command(flatten)]
        io: InputArg,
    },
    /// Apply normalization steps line by line, in the order given.
    Normalize(NormalizeArgs),
    /// Drop stopwords from each line.
    Stopwords {
        /// Stopword list replacing the bundled one.
        #[arg(long = "static", conflicts_with = "dynamic")]
        lexicon: Option<PathBuf>,
        /// Detect stopwords from the input's own frequency curve.
        #[arg(long)]
        dynamic: bool,
        /// Detect on tokens as written instead of lowercased.
        #[arg(long, requires = "dynamic")]
        case_sensitive: bool,
        #[command(flatten)]
        io: InputArg,
    },
    /// Train or apply a unigram subword vocabulary.
    #[command(subcommand)]
    Tokenizer(TokenizerCommand),
    /// Train a task model from a corpus.
    Train(TrainArgs),
    /// Tag whitespace-tokenized sentences, one per line.
    Tag(TagArgs),
    /// Classify one text per line.
    Classify(ClassifyArgs),
    /// Score predictions or a model against a gold corpus.
    Eval(EvalArgs),
    /// Correct spelling line by line.
    Spell(SpellArgs),
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub lower: bool,
    #[arg(long)]
    pub no_punct: bool,
    #[arg(long)]
    pub no_accents: bool,
    #[arg(long)]
    pub deascii: bool,
    /// Spell out numerals.
    #[arg(long)]
    pub num2word: bool,
    /// Correct spelling against a `word<TAB>count` dictionary.
    #[arg(long, value_name = "DICT")]
    pub spell: Option<PathBuf>,
    #[command(flatten)]
    pub io: InputArg,
}

#[derive(Debug, Subcommand)]
pub enum TokenizerCommand {
    Train {
        /// Number of pieces besides the special tokens.
        #[arg(long)]
        size: usize,
        #[arg(long = "in")]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print each word's pieces; words are tab-separated.
    Encode {
        #[arg(long)]
        vocab: PathBuf,
        /// Print piece ids instead of pieces.
        #[arg(long)]
        ids: bool,
        #[command(flatten)]
        io: InputArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainTask {
    Ner,
    Pos,
    Morph,
    Dep,
    Sentiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagTask {
    Ner,
    Pos,
    Morph,
    Dep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifyTask {
    Sentiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTask {
    Ner,
    Pos,
    Morph,
    Dep,
    Sentiment,
    Spell,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub task: TrainTask,
    #[arg(long)]
    pub data: PathBuf,
    /// Model directory; defaults to `$VNLP_MODEL_DIR/<task>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Subword vocabulary size when no `--vocab` is given.
    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,
    /// Existing vocabulary file.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Morphological lexicon replacing the bundled one.
    #[arg(long)]
    pub analyzer: Option<PathBuf>,
    /// Small layers suited to corpora of a few dozen sentences.
    #[arg(long)]
    pub toy_sizes: bool,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    pub task: TagTask,
    /// Model directory; defaults to `$VNLP_MODEL_DIR/<task>`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub analyzer: Option<PathBuf>,
    #[command(flatten)]
    pub io: InputArg,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub task: ClassifyTask,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[command(flatten)]
    pub io: InputArg,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["pred", "model"])))]
pub struct EvalArgs {
    pub task: EvalTask,
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions in the gold corpus format.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Model directory to run over the gold inputs.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub analyzer: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("lm").required(true).args(["dict", "corpus"])))]
pub struct SpellArgs {
    /// `word<TAB>count` dictionary (unigram scoring only).
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Plain-text corpus for trigram scoring.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub max_edit: usize,
    /// Also replace dictionary words when a candidate scores this many times higher.
    #[arg(long)]
    pub margin: Option<f64>,
    #[command(flatten)]
    pub io: InputArg,
}

/// Output sink that knows whether to print text or JSON lines.
pub struct Out<'a> {
    w: &'a mut dyn Write,
    json: bool,
}

impl Out<'_> {
    pub fn emit(&mut self, text: &str, json: impl FnOnce() -> Value) -> CliResult<()> {
        if self.json {
            writeln!(self.w, "{}", json())?;
        } else {
            writeln!(self.w, "{text}")?;
        }
        Ok(())
    }

    pub fn json(&self) -> bool {
        self.json
    }
}

pub struct Ctx<'a> {
    pub seed: u64,
    pub input: &'a mut dyn BufRead,
    pub out: Out<'a>,
}

impl Ctx<'_> {
    /// Lines from `--input` or standard input.
    pub fn lines(&mut self, io: &InputArg) -> CliResult<Vec<String>> {
        match &io.input {
            Some(p) => Ok(read_text(p)?.lines().map(str::to_string).collect()),
            None => Ok(self.input.lines().collect::<io::Result<_>>()?),
        }
    }
}

pub(crate) fn require_file(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Missing(path.to_path_buf()))
    }
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    require_file(path)?;
    std::fs::read_to_string(path).map_err(|e| CliError::File {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

pub(crate) fn in_file<T>(path: &Path, r: tnlp::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// `explicit`, or `$VNLP_MODEL_DIR/<name>`.
pub(crate) fn model_dir(explicit: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    match std::env::var_os(MODEL_DIR_ENV) {
        Some(root) if !root.is_empty() => Ok(PathBuf::from(root).join(name)),
        _ => Err(CliError::Usage(format!("no model directory given and {MODEL_DIR_ENV} is unset"))),
    }
}

/// Flags of `normalize` sorted by their position on the command line.
fn normalize_order(matches: &ArgMatches) -> Vec<text::Step> {
    let Some(("normalize", m)) = matches.subcommand() else {
        return Vec::new();
    };
    let mut steps: Vec<(usize, text::Step)> = [
        ("lower", text::Step::Lower),
        ("no_punct", text::Step::NoPunct),
        ("no_accents", text::Step::NoAccents),
        ("deascii", text::Step::Deascii),
        ("num2word", text::Step::Num2Word),
        ("spell", text::Step::Spell),
    ]
    .into_iter()
    .filter(|(id, _)| m.value_source(id) == Some(clap::parser::ValueSource::CommandLine))
    .filter_map(|(id, s)| m.index_of(id).map(|i| (i, s)))
    .collect();
    steps.sort_by_key(|(i, _)| *i);
    steps.into_iter().map(|(_, s)| s).collect()
}

fn dispatch(cli: Cli, steps: Vec<text::Step>, ctx: &mut Ctx) -> CliResult<()> {
    match cli.command {
        Command::SplitSentences { abbrev, io } => text::split(ctx, abbrev.as_deref(), &io),
        Command::Normalize(args) => text::normalize(ctx, &args, &steps),
        Command::Stopwords {
            lexicon,
            dynamic,
            case_sensitive,
            io,
        } => text::stopwords(ctx, lexicon.as_deref(), dynamic, !case_sensitive, &io),
        Command::Tokenizer(TokenizerCommand::Train { size, corpus, out }) => text::tokenizer_train(ctx, size, &corpus, &out),
        Command::Tokenizer(TokenizerCommand::Encode { vocab, ids, io }) => text::tokenizer_encode(ctx, &vocab, ids, &io),
        Command::Train(args) => models::train(ctx, &args),
        Command::Tag(args) => models::tag(ctx, &args),
        Command::Classify(args) => models::classify(ctx, &args),
        Command::Eval(args) => models::eval(ctx, &args),
        Command::Spell(args) => text::spell(ctx, &args),
    }
}

/// Parse `args` (program name first) and run the verb. Returns the exit status.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    1
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return 1;
        }
    };
    let steps = normalize_order(&matches);
    let mut ctx = Ctx {
        seed: cli.seed,
        input,
        out: Out { w: out, json: cli.json },
    };
    match dispatch(cli, steps, &mut ctx).and_then(|()| Ok(ctx.out.w.flush()?)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let _ = writeln!(err, "{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}
