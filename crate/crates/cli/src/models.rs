//! Verbs that train, apply and score task models.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use tnlp::corpus::metrics::edit_distance;
use tnlp::corpus::{accuracy, f1_macro, las_uas, read_conllu, read_ner_io, read_sentiment_tsv};
use tnlp::neural::TrainConfig;
use tnlp::pipeline::{self, load_bundle, save_bundle, toy_train_config, Dataset, ModelSizes, Prediction, Task, TaskModel};
use tnlp::sentiment::Sentiment;
use tnlp::tasks::dep::DepArc;
use tnlp::tasks::morph::{read_morph_records, LexiconAnalyzer};
use tnlp::unigram::UnigramVocab;
use tnlp::Error;

use crate::text::load_vocab;
use crate::{
    in_file, model_dir, read_text, require_file, ClassifyArgs, CliError, CliResult, Ctx, EvalArgs, EvalTask, TagArgs,
    TagTask, TrainArgs, TrainTask,
};

fn train_task(t: TrainTask) -> Task {
    match t {
        TrainTask::Ner => Task::Ner,
        TrainTask::Pos => Task::Pos,
        TrainTask::Morph => Task::Morph,
        TrainTask::Dep => Task::Dep,
        TrainTask::Sentiment => Task::Sentiment,
    }
}

fn tag_task(t: TagTask) -> Task {
    match t {
        TagTask::Ner => Task::Ner,
        TagTask::Pos => Task::Pos,
        TagTask::Morph => Task::Morph,
        TagTask::Dep => Task::Dep,
    }
}

fn load_analyzer(p: &Option<PathBuf>) -> CliResult<LexiconAnalyzer> {
    match p {
        Some(p) => {
            require_file(p)?;
            in_file(p, LexiconAnalyzer::load_file(p))
        }
        None => Ok(LexiconAnalyzer::shipped()),
    }
}

fn read_dataset(task: Task, p: &Path) -> CliResult<Dataset> {
    in_file(p, Dataset::parse(task, &read_text(p)?))
}

fn load_model(dir: &Path, task: Task) -> CliResult<(TaskModel, UnigramVocab)> {
    require_file(dir)?;
    let (model, vocab) = in_file(dir, load_bundle(dir))?;
    if model.task() != task {
        return Err(CliError::File {
            path: dir.to_path_buf(),
            source: Error::Data {
                line: None,
                msg: format!("holds a {} model, not {}", model.task(), task),
            },
        });
    }
    Ok((model, vocab))
}

fn check_threshold(t: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(CliError::Usage("--threshold must lie in [0, 1]".into()))
    }
}

pub fn train(ctx: &mut Ctx, args: &TrainArgs) -> CliResult<()> {
    let task = train_task(args.task);
    let epochs = args.epochs.unwrap_or(TrainConfig::default().epochs);
    if epochs == 0 {
        return Err(CliError::Usage("--epochs must be at least 1".into()));
    }
    if args.lr.is_some_and(|lr| !(lr > 0.0 && lr.is_finite())) {
        return Err(CliError::Usage("--lr must be a positive number".into()));
    }
    if args.vocab_size == 0 {
        return Err(CliError::Usage("--vocab-size must be at least 1".into()));
    }
    let out_dir = model_dir(&args.out, task.name())?;
    require_file(&args.data)?;
    if let Some(v) = &args.vocab {
        require_file(v)?;
    }
    let analyzer = load_analyzer(&args.analyzer)?;

    let data = read_dataset(task, &args.data)?;
    let vocab = match &args.vocab {
        Some(v) => load_vocab(v)?,
        None => in_file(&args.data, pipeline::train_vocab(&[&data], args.vocab_size))?,
    };
    let (sizes, mut tc) = if args.toy_sizes {
        (ModelSizes::toy(), toy_train_config(epochs))
    } else {
        (ModelSizes::default(), TrainConfig { epochs, ..TrainConfig::default() })
    };
    if let Some(lr) = args.lr {
        tc.learning_rate = lr;
    }

    let mut write_err = None;
    let out = &mut ctx.out;
    let (model, _) = in_file(
        &args.data,
        pipeline::train(&data, &vocab, &analyzer, &sizes, &tc, ctx.seed, &mut |epoch, loss| {
            let lr = tc.lr_at(epoch);
            let n = epoch + 1;
            if let Err(e) = out.emit(&format!("epoch {n} loss {loss} lr {lr}"), || json!({ "epoch": n, "loss": loss, "lr": lr })) {
                write_err.get_or_insert(e);
            }
        }),
    )?;
    if let Some(e) = write_err {
        return Err(e);
    }
    save_bundle(&out_dir, &model, &vocab)?;
    Ok(())
}

fn conllu_line(i: usize, form: &str, upos: &str, head: &str, rel: &str) -> String {
    format!("{}\t{form}\t_\t{upos}\t_\t_\t{head}\t{rel}\t_\t_", i + 1)
}

pub fn tag(ctx: &mut Ctx, args: &TagArgs) -> CliResult<()> {
    let task = tag_task(args.task);
    let dir = model_dir(&args.model, task.name())?;
    if let Some(p) = &args.io.input {
        require_file(p)?;
    }
    let (model, vocab) = load_model(&dir, task)?;
    let analyzer = load_analyzer(&args.analyzer)?;
    for line in ctx.lines(&args.io)? {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        match model.predict(&words, &vocab, &analyzer, 0.5)? {
            Prediction::Tags(tags) => {
                let block: Vec<String> = match task {
                    Task::Pos => words.iter().zip(&tags).enumerate().map(|(i, (w, t))| conllu_line(i, w, t, "0", "_")).collect(),
                    _ => words.iter().zip(&tags).map(|(w, t)| format!("{w}\t{t}")).collect(),
                };
                let key = if task == Task::Morph { "analyses" } else { "tags" };
                ctx.out.emit(&format!("{}\n", block.join("\n")), || json!({ "words": words, key: tags }))?;
            }
            Prediction::Arcs(arcs) => {
                let block: Vec<String> = words
                    .iter()
                    .zip(&arcs)
                    .enumerate()
                    .map(|(i, (w, (h, l)))| conllu_line(i, w, "_", &h.to_string(), l))
                    .collect();
                let heads: Vec<usize> = arcs.iter().map(|a| a.0).collect();
                let labels: Vec<&str> = arcs.iter().map(|a| a.1.as_str()).collect();
                ctx.out.emit(&format!("{}\n", block.join("\n")), || json!({ "words": words, "heads": heads, "labels": labels }))?;
            }
            Prediction::Label(..) => unreachable!("taggers do not classify"),
        }
    }
    Ok(())
}

pub fn classify(ctx: &mut Ctx, args: &ClassifyArgs) -> CliResult<()> {
    check_threshold(args.threshold)?;
    let dir = model_dir(&args.model, Task::Sentiment.name())?;
    if let Some(p) = &args.io.input {
        require_file(p)?;
    }
    let (model, vocab) = load_model(&dir, Task::Sentiment)?;
    let analyzer = LexiconAnalyzer::default();
    for line in ctx.lines(&args.io)? {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let Prediction::Label(label, p) = model.predict(&words, &vocab, &analyzer, args.threshold)? else {
            unreachable!("sentiment models classify")
        };
        let bit = u8::from(label == Sentiment::Positive);
        let text = words.join(" ");
        ctx.out.emit(&format!("{bit}\t{text}"), || json!({ "text": text, "label": label.to_string(), "probability": p }))?;
    }
    Ok(())
}

fn aligned<T>(gold: &[T], pred: &[T], len: impl Fn(&T) -> usize) -> tnlp::Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Data {
            line: None,
            msg: format!("{} predicted sentences for {} gold sentences", pred.len(), gold.len()),
        });
    }
    if let Some(i) = gold.iter().zip(pred).position(|(g, p)| len(g) != len(p)) {
        return Err(Error::Data {
            line: None,
            msg: format!("sentence {} has {} gold and {} predicted words", i + 1, len(&gold[i]), len(&pred[i])),
        });
    }
    Ok(())
}

fn tagger_scores(gold: Vec<String>, pred: Vec<String>) -> tnlp::Result<Vec<(&'static str, f64)>> {
    Ok(vec![("accuracy", accuracy(&gold, &pred)?), ("f1_macro", f1_macro(&gold, &pred)?)])
}

fn dep_arcs(sentences: &[tnlp::corpus::ConlluSentence], labels: &mut BTreeMap<String, usize>) -> Vec<Vec<DepArc>> {
    sentences
        .iter()
        .map(|s| {
            s.heads
                .iter()
                .zip(&s.deprels)
                .map(|(h, r)| {
                    let next = labels.len();
                    DepArc {
                        head: *h,
                        label: *labels.entry(r.clone()).or_insert(next),
                    }
                })
                .collect()
        })
        .collect()
}

/// Corpus-level WER between line-aligned reference and hypothesis texts.
fn spelling_wer(gold: &str, pred: &str) -> tnlp::Result<f64> {
    let g: Vec<&str> = gold.lines().collect();
    let p: Vec<&str> = pred.lines().collect();
    aligned(&g, &p, |_| 0)?;
    let (mut edits, mut words) = (0usize, 0usize);
    for (a, b) in g.iter().zip(&p) {
        let a: Vec<&str> = a.split_whitespace().collect();
        let b: Vec<&str> = b.split_whitespace().collect();
        edits += edit_distance(&a, &b);
        words += a.len();
    }
    if words == 0 {
        return Err(Error::Data {
            line: None,
            msg: "reference text has no words".into(),
        });
    }
    Ok(edits as f64 / words as f64)
}

fn scores_from_files(task: EvalTask, gold: &Path, pred: &Path) -> CliResult<Vec<(&'static str, f64)>> {
    let (g, p) = (read_text(gold)?, read_text(pred)?);
    let both = |r: tnlp::Result<Vec<(&'static str, f64)>>| in_file(pred, r);
    match task {
        EvalTask::Ner => {
            let gs = in_file(gold, read_ner_io(g.as_bytes()))?;
            let ps = in_file(pred, read_ner_io(p.as_bytes()))?;
            both(aligned(&gs, &ps, |s| s.0.len()).and_then(|()| {
                tagger_scores(gs.into_iter().flat_map(|s| s.1).collect(), ps.into_iter().flat_map(|s| s.1).collect())
            }))
        }
        EvalTask::Pos | EvalTask::Dep => {
            let gs = in_file(gold, read_conllu(g.as_bytes()))?;
            let ps = in_file(pred, read_conllu(p.as_bytes()))?;
            in_file(pred, aligned(&gs, &ps, |s| s.len()))?;
            if task == EvalTask::Pos {
                return both(tagger_scores(
                    gs.into_iter().flat_map(|s| s.upos).collect(),
                    ps.into_iter().flat_map(|s| s.upos).collect(),
                ));
            }
            let mut labels = BTreeMap::new();
            let (ga, pa) = (dep_arcs(&gs, &mut labels), dep_arcs(&ps, &mut labels));
            let (las, uas) = in_file(pred, las_uas(&ga, &pa))?;
            Ok(vec![("LAS", las), ("UAS", uas)])
        }
        EvalTask::Morph => {
            let gs = in_file(gold, read_morph_records(g.as_bytes()))?;
            let ps = in_file(pred, read_morph_records(p.as_bytes()))?;
            in_file(pred, aligned(&gs, &ps, |s| s.words.len()))?;
            let str_of = |rs: Vec<tnlp::tasks::morph::MorphRecord>| -> Vec<String> {
                rs.into_iter().flat_map(|r| r.gold).map(|a| a.to_string()).collect()
            };
            Ok(vec![("accuracy", in_file(pred, accuracy(&str_of(gs), &str_of(ps)))?)])
        }
        EvalTask::Sentiment => {
            let gs = in_file(gold, read_sentiment_tsv(g.as_bytes()))?;
            let ps = in_file(pred, read_sentiment_tsv(p.as_bytes()))?;
            in_file(pred, aligned(&gs, &ps, |_| 0))?;
            let gl: Vec<bool> = gs.iter().map(|e| e.1).collect();
            let pl: Vec<bool> = ps.iter().map(|e| e.1).collect();
            both(accuracy(&gl, &pl).and_then(|a| Ok(vec![("accuracy", a), ("f1_macro", f1_macro(&gl, &pl)?)])))
        }
        EvalTask::Spell => Ok(vec![("WER", in_file(pred, spelling_wer(&g, &p))?)]),
    }
}

pub fn eval(ctx: &mut Ctx, args: &EvalArgs) -> CliResult<()> {
    check_threshold(args.threshold)?;
    require_file(&args.gold)?;
    let scores = match (&args.pred, &args.model) {
        (Some(pred), None) => {
            require_file(pred)?;
            scores_from_files(args.task, &args.gold, pred)?
        }
        (None, Some(dir)) => {
            let task = match args.task {
                EvalTask::Ner => Task::Ner,
                EvalTask::Pos => Task::Pos,
                EvalTask::Morph => Task::Morph,
                EvalTask::Dep => Task::Dep,
                EvalTask::Sentiment => Task::Sentiment,
                EvalTask::Spell => return Err(CliError::Usage("eval spell takes --pred, not --model".into())),
            };
            let (model, vocab) = load_model(dir, task)?;
            let analyzer = load_analyzer(&args.analyzer)?;
            let gold = read_dataset(task, &args.gold)?;
            let labels = model.dep_labels().to_vec();
            let prepared = in_file(&args.gold, pipeline::prepare(&gold, &vocab, &analyzer, &labels))?;
            in_file(&args.gold, model.evaluate(&prepared, args.threshold))?
        }
        _ => return Err(CliError::Usage("give exactly one of --pred or --model".into())),
    };
    let text = scores.iter().map(|(k, v)| format!("{k} {v:.6}")).collect::<Vec<_>>().join(" ");
    ctx.out.emit(&text, || {
        Value::Object(scores.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<Map<_, _>>())
    })
}
