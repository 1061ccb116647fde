#![allow(dead_code)]

use std::path::PathBuf;

use tnlp::pipeline::{train_vocab, Dataset, Task};
use tnlp::unigram::UnigramVocab;

pub fn toy_path(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy")).join(name)
}

pub fn toy_text(name: &str) -> String {
    std::fs::read_to_string(toy_path(name)).unwrap()
}

pub fn toy_dataset(task: Task) -> Dataset {
    let file = match task {
        Task::Ner => "ner.tsv",
        Task::Pos | Task::Dep => "treebank.conllu",
        Task::Morph => "morph.tsv",
        Task::Sentiment => "sentiment.tsv",
    };
    Dataset::parse(task, &toy_text(file)).unwrap()
}

/// One vocabulary over every toy corpus.
pub fn toy_vocab() -> UnigramVocab {
    let all: Vec<Dataset> = Task::ALL.into_iter().map(toy_dataset).collect();
    train_vocab(&all.iter().collect::<Vec<_>>(), 200).unwrap()
}

pub fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tnlp-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}
