//! Decoding over an abstract acoustic interface: CTC greedy, the CTC
//! forward algorithm, attention greedy, and joint CTC/attention beam
//! search with incremental prefix scoring.
//!
//! All entry points are pure functions of (scorer, lattice, options):
//! identical inputs give bit-identical outputs, with argmax and ranking
//! ties broken deterministically.

mod beam;
mod ctc;
mod lattice;
pub mod logmath;
mod model_config;
mod scorer;

pub use beam::{
    attention_greedy, joint_beam_search, Algorithm, DecodeOptions, GreedyDecode, Hypothesis,
    ScoredSequence,
};
pub use ctc::{ctc_forward_logprob, ctc_greedy, is_impossible, CtcPrefixScorer, CtcPrefixState};
pub use lattice::{
    read_lattice, read_lattice_binary, read_lattice_json, write_lattice_binary,
    write_lattice_json, LogProbLattice, LATTICE_MAGIC,
};
pub use model_config::ModelConfig;
pub use scorer::{
    read_table_scorer, read_table_scorer_file, write_table_scorer, StepScorer, TableScorer,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("lattice has no frames")]
    EmptyLattice,
    #[error("lattice frame {frame} is not the vocabulary width")]
    RaggedLattice { frame: usize },
    #[error("lattice frame {frame} is not normalized (logsumexp = {norm})")]
    UnnormalizedRow { frame: usize, norm: f64 },
    #[error("blank id {blank_id} out of range for vocabulary of {vocab_size}")]
    BadBlankId { blank_id: u32, vocab_size: usize },
    #[error("label {label} out of range for vocabulary of {vocab_size}")]
    LabelOutOfRange { label: u32, vocab_size: usize },
    #[error("labels must not contain the blank")]
    BlankInLabels,
    #[error("beam size must be at least 1")]
    BeamSizeZero,
    #[error("ctc weight {0} is outside [0, 1]")]
    CtcWeightOutOfRange(f64),
    #[error("lattice vocabulary ({lattice}) does not match scorer vocabulary ({scorer})")]
    VocabSizeMismatch { lattice: usize, scorer: usize },
    #[error("scorer row has {found} entries, expected {expected}")]
    ScorerRowLength { expected: usize, found: usize },
    #[error("decoder file: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
