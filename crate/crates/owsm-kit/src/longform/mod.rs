//! Long-form transcription: decode unsegmented audio in 30 s chunks,
//! shifting the window by the last predicted end timestamp.
//!
//! The driver is sequential per stream (each chunk depends on the cursor
//! and, optionally, on previous text used as a prompt); separate streams
//! can run concurrently against a thread-safe [`AcousticModel`].

pub mod scenario;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpe::segment_with_pieces;
use crate::data_prep::pad_or_trim_audio;
use crate::decoder::{
    attention_greedy, ctc_greedy, joint_beam_search, Algorithm, DecodeOptions, DecoderError,
    LogProbLattice, StepScorer,
};
use crate::token_format::{
    decode_tokens_lenient, Task, TokenParseError, Vocabulary,
    TIMESTAMP_STEP_SECONDS,
};

/// Window length processed per chunk.
pub const CHUNK_SECONDS: f64 = 30.0;
/// Window length in 20 ms timestamp steps.
pub const CHUNK_STEPS: u64 = 1500;

/// One chunk's worth of acoustic evidence: a CTC lattice and an
/// autoregressive scorer over the same vocabulary.
pub struct ChunkModel {
    pub lattice: LogProbLattice,
    pub scorer: Box<dyn StepScorer>,
}

/// Produces [`ChunkModel`]s from padded 30 s audio chunks. Implementations
/// must be deterministic per chunk content.
pub trait AcousticModel: Send + Sync {
    fn process_chunk(
        &self,
        chunk: &[f32],
        sample_rate: u32,
    ) -> Result<ChunkModel, Box<dyn std::error::Error + Send + Sync>>;
}

/// A transcribed stretch with absolute (whole-audio) times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongFormSegment {
    pub absolute_start: f64,
    pub absolute_end: f64,
    pub text: String,
}

/// Per-chunk audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTrace {
    pub cursor: f64,
    pub shift: f64,
    pub token_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LongFormResult {
    pub segments: Vec<LongFormSegment>,
    pub chunk_trace: Vec<ChunkTrace>,
}

impl LongFormResult {
    pub fn text(&self) -> String {
        self.segments.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn cursors(&self) -> Vec<f64> {
        self.chunk_trace.iter().map(|t| t.cursor).collect()
    }
}

/// Conditioning and task selection for [`transcribe_longform`].
#[derive(Debug, Clone)]
pub struct LongFormOptions {
    pub language: String,
    pub task: Task,
    /// Feed the tail of previously emitted text as a prompt.
    pub condition_on_previous: bool,
    pub max_prompt_tokens: usize,
}

impl LongFormOptions {
    pub fn new(language: impl Into<String>) -> Self {
        LongFormOptions {
            language: language.into(),
            task: Task::Asr,
            condition_on_previous: true,
            max_prompt_tokens: 200,
        }
    }
}

#[derive(Debug, Error)]
pub enum LongformError {
    #[error("audio is empty")]
    EmptyAudio,
    #[error("language {0:?} is not in the vocabulary")]
    UnknownLanguage(String),
    #[error("translation target {0:?} is not in the vocabulary")]
    UnknownTarget(String),
    #[error("acoustic model failed on chunk {chunk_index}: {message}")]
    Model {
        chunk_index: usize,
        message: String,
        /// Everything transcribed before the failing chunk.
        partial: Box<LongFormResult>,
    },
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Transcribes unsegmented audio chunk by chunk.
///
/// Loop: pad the window at the cursor to 30 s, decode it with the forced
/// context (prompt included when conditioning), parse the tokens, emit
/// every segment that closed with an end timestamp, and advance by the
/// last emitted end — or by the full 30 s when no timestamp was produced.
/// A final segment with a start but no end is held back and re-decoded in
/// the next window. Cursor arithmetic runs on the 20 ms timestamp grid,
/// and every shift is positive, so the loop always terminates.
pub fn transcribe_longform(
    audio: &[f32],
    sample_rate: u32,
    model: &dyn AcousticModel,
    vocab: &Vocabulary,
    decode_opts: &DecodeOptions,
    opts: &LongFormOptions,
) -> Result<LongFormResult, LongformError> {
    if audio.is_empty() {
        return Err(LongformError::EmptyAudio);
    }
    let language_id = vocab
        .language_id(&opts.language)
        .ok_or_else(|| LongformError::UnknownLanguage(opts.language.clone()))?;
    let task_id = match &opts.task {
        Task::Asr => vocab.asr_id(),
        Task::St { target } => vocab
            .st_id(target)
            .ok_or_else(|| LongformError::UnknownTarget(target.clone()))?,
    };

    // Timestamp tokens never advance the CTC prefix state.
    let mut decode_opts = decode_opts.clone();
    decode_opts.eos_id = vocab.eos_id();
    decode_opts.attention_only = BTreeSet::from_iter(vocab.timestamp_ids());

    let samples_per_step = (f64::from(sample_rate) * TIMESTAMP_STEP_SECONDS).round() as usize;
    let audio_seconds = audio.len() as f64 / f64::from(sample_rate);

    let mut result = LongFormResult::default();
    let mut cursor_steps: u64 = 0;
    let mut previous_text = String::new();
    let mut chunk_index = 0usize;

    while (cursor_steps as usize) * samples_per_step < audio.len() {
        let cursor_seconds = timestamp_seconds_u64(cursor_steps);
        let chunk_start = cursor_steps as usize * samples_per_step;
        let chunk_end = (chunk_start + (CHUNK_STEPS as usize) * samples_per_step).min(audio.len());
        let chunk = pad_or_trim_audio(&audio[chunk_start..chunk_end], CHUNK_SECONDS, sample_rate);

        let chunk_model = match model.process_chunk(&chunk, sample_rate) {
            Ok(m) => m,
            Err(e) => {
                return Err(LongformError::Model {
                    chunk_index,
                    message: e.to_string(),
                    partial: Box::new(result),
                })
            }
        };

        // Forced context: [SOP prompt]? SOS <lang> <task>.
        let mut context = Vec::new();
        if opts.condition_on_previous {
            if let Some(prompt) = build_prompt(&previous_text, vocab, opts.max_prompt_tokens) {
                context.push(vocab.sop_id());
                for piece in segment_with_pieces(&prompt, vocab.max_piece_len(), |s| {
                    vocab.piece_id(s).is_some()
                })
                .expect("prompt is made of known pieces")
                {
                    context.push(vocab.piece_id(piece).expect("known piece"));
                }
            }
        }
        context.push(vocab.sos_id());
        context.push(language_id);
        context.push(task_id);

        let tokens = match decode_opts.algorithm {
            Algorithm::CtcGreedy => ctc_greedy(&chunk_model.lattice),
            Algorithm::AttentionGreedy => {
                attention_greedy(
                    chunk_model.scorer.as_ref(),
                    &context,
                    decode_opts.eos_id,
                    decode_opts.max_len,
                )
                .tokens
            }
            Algorithm::Joint => {
                let nbest = joint_beam_search(
                    chunk_model.scorer.as_ref(),
                    &chunk_model.lattice,
                    &context,
                    &decode_opts,
                )?;
                nbest.into_iter().next().map(|h| h.tokens).unwrap_or_default()
            }
        };
        let token_count = tokens.len();

        let mut full = context.clone();
        full.extend(&tokens);
        full.push(vocab.eos_id());

        let chunk_seconds = (audio_seconds - cursor_seconds).min(CHUNK_SECONDS);
        let (shift_steps, warning) = match decode_tokens_lenient(&full, vocab) {
            Ok(decoded) => {
                let mut last_end_steps: u64 = 0;
                for segment in &decoded.record.segments {
                    if decoded.record.timestamps_enabled {
                        let (Some(start), Some(end)) = (segment.start, segment.end) else {
                            continue;
                        };
                        // Absolute times stay on the 20 ms grid, so sums
                        // cannot drift off the decimal values.
                        result.segments.push(LongFormSegment {
                            absolute_start: timestamp_seconds_u64(
                                cursor_steps + steps_of_seconds(start),
                            ),
                            absolute_end: timestamp_seconds_u64(
                                cursor_steps + steps_of_seconds(end),
                            ),
                            text: segment.text.clone(),
                        });
                        last_end_steps = steps_of_seconds(end);
                    } else {
                        result.segments.push(LongFormSegment {
                            absolute_start: cursor_seconds,
                            absolute_end: cursor_seconds + chunk_seconds,
                            text: segment.text.clone(),
                        });
                    }
                    previous_text.push_str(&segment.text);
                }
                let shift = if last_end_steps > 0 {
                    last_end_steps
                } else {
                    CHUNK_STEPS
                };
                (shift, None)
            }
            Err(e) => (CHUNK_STEPS, Some(parse_warning(&e))),
        };

        result.chunk_trace.push(ChunkTrace {
            cursor: cursor_seconds,
            shift: timestamp_seconds_u64(shift_steps),
            token_count,
            warning,
        });
        cursor_steps += shift_steps;
        chunk_index += 1;
    }

    Ok(result)
}

fn parse_warning(e: &TokenParseError) -> String {
    format!("decoded tokens did not parse ({e}); shifted a full window")
}

// Grid seconds via division by 50, which is correctly rounded; see
// `token_format::timestamp_seconds`.
fn timestamp_seconds_u64(steps: u64) -> f64 {
    steps as f64 / 50.0
}

fn steps_of_seconds(seconds: f64) -> u64 {
    (seconds * 50.0).round() as u64
}

/// Longest suffix of `previous_text` that encodes to at most
/// `max_prompt_tokens` pieces, cut on a piece boundary. Empty text or a
/// zero budget yields no prompt.
pub fn build_prompt(
    previous_text: &str,
    vocab: &Vocabulary,
    max_prompt_tokens: usize,
) -> Option<String> {
    if previous_text.is_empty() || max_prompt_tokens == 0 {
        return None;
    }
    let pieces = segment_with_pieces(previous_text, vocab.max_piece_len(), |s| {
        vocab.piece_id(s).is_some()
    })
    .ok()?;
    let mut take = pieces.len().min(max_prompt_tokens);
    while take > 0 {
        let suffix: String = pieces[pieces.len() - take..].concat();
        // Re-segmenting a suffix can pick a different split, so verify the
        // budget on the actual encoding.
        let encoded = segment_with_pieces(&suffix, vocab.max_piece_len(), |s| {
            vocab.piece_id(s).is_some()
        })
        .ok()?;
        if encoded.len() <= max_prompt_tokens {
            return Some(suffix);
        }
        take -= 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn char_vocab(corpus: &str) -> Vocabulary {
        let mut chars: Vec<String> = corpus.chars().map(String::from).collect();
        chars.sort();
        chars.dedup();
        Vocabulary::build(&chars, &strs(&["en"]), &[]).unwrap()
    }

    #[test]
    fn empty_previous_text_gives_no_prompt() {
        let vocab = char_vocab("abc");
        assert_eq!(build_prompt("", &vocab, 10), None);
        assert_eq!(build_prompt("abc", &vocab, 0), None);
    }

    #[test]
    fn prompt_is_a_piece_suffix_within_budget() {
        let vocab = char_vocab("abcdefgh");
        let prompt = build_prompt("abcdefgh", &vocab, 3).unwrap();
        assert_eq!(prompt, "fgh");
        // Budget beyond the text keeps everything.
        assert_eq!(build_prompt("abc", &vocab, 50).unwrap(), "abc");
    }
}
