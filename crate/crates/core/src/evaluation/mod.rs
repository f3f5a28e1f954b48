//! CoNLL ingestion and relaxed (overlap-based) F1 scoring.

mod conll;
mod metrics;

use thiserror::Error;

pub use conll::{read_conll, read_conll_file, read_conll_sentences, ConllSentence};
pub use metrics::{
    evaluate, evaluate_with, match_annotations, relaxed_match, strict_match, ClassMetrics,
    EvalReport, MatchMode, Matching,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Conll { line: usize, message: String },
    #[error("{predictions} predicted documents but {gold} gold documents")]
    CountMismatch { predictions: usize, gold: usize },
    #[error("document {index}: predicted and gold texts differ")]
    TextMismatch { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
