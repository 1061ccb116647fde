//! Turkish NLP toolkit: rule-based preprocessing, a unigram subword
//! tokenizer, and GRU context-model taggers trained from scratch.

pub mod context_model;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod neural;
pub mod normalizer;
pub mod pipeline;
pub mod sentence_splitter;
pub mod sentiment;
pub mod stopwords;
pub mod tasks;
pub mod unigram;

pub use error::{Error, Result};
