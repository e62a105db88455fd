//! Deterministic building blocks for Whisper-style multitask speech pipelines.
//!
//! The crate covers the non-neural parts of a multitask speech stack:
//!
//! - [`token_format`]: the multitask token vocabulary (special tokens,
//!   quantized timestamps) and lossless conversion between structured
//!   records and token-id sequences.
//! - [`bpe`]: a minimal byte-pair-encoding trainer and codec.
//! - [`data_prep`]: long-form sample construction (≤30 s windows), length
//!   filtering, sharding, reservoir sampling and audio padding.
//! - [`features`]: log-Mel extraction, global mean/variance normalization,
//!   SpecAugment and frame-stacking time reduction.
//! - [`decoder`]: CTC greedy/forward/prefix scoring and joint
//!   CTC/attention beam search over an abstract step-scorer interface.
//! - [`longform`]: chunked transcription of unsegmented audio driven by
//!   predicted timestamps, with scriptable mock acoustic models.
//! - [`eval`]: text normalization, WER/CER, corpus BLEU and LID accuracy.
//!
//! Acoustic models are pluggable and mocked in tests, so every algorithm is
//! exercised against brute-force oracles without any trained network.

pub mod bpe;
pub mod data_prep;
pub mod decoder;
pub mod eval;
pub mod features;
pub mod longform;
pub mod token_format;
pub mod wav;
