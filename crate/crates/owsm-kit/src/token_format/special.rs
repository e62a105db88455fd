//! Special tokens and timestamp quantization.

use std::fmt;

use thiserror::Error;

/// Timestamps live on a 20 ms grid covering 0.00 s … 30.00 s.
pub const TIMESTAMP_STEP_SECONDS: f64 = 0.02;

/// Number of distinct timestamp tokens (`<0.00>` … `<30.00>`).
pub const NUM_TIMESTAMP_TOKENS: u16 = 1501;

/// Largest valid timestamp index (30.00 s).
pub const MAX_TIMESTAMP_INDEX: u16 = NUM_TIMESTAMP_TOKENS - 1;

/// A non-text token of the multitask target format.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SpecialToken {
    /// Start of the optional text prompt.
    Sop,
    /// Start of the actual target sequence.
    Sos,
    /// End of the target sequence.
    Eos,
    /// Language of the input speech (ISO-639 code).
    Language(String),
    /// Transcribe in the source language.
    TaskAsr,
    /// Translate into the given target language (one token per target).
    TaskSt(String),
    /// Quantized time offset within the 30 s window, in 20 ms steps.
    Timestamp(u16),
    /// CTC blank. Never emitted by text serialization.
    Blank,
}

impl SpecialToken {
    /// Textual rendering used in vocabulary files.
    pub fn render(&self) -> String {
        match self {
            SpecialToken::Sop => "<sop>".to_string(),
            SpecialToken::Sos => "<sos>".to_string(),
            SpecialToken::Eos => "<eos>".to_string(),
            SpecialToken::Language(code) => format!("<{code}>"),
            SpecialToken::TaskAsr => "<asr>".to_string(),
            SpecialToken::TaskSt(code) => format!("<st_{code}>"),
            SpecialToken::Timestamp(index) => {
                format!("<{:.2}>", f64::from(*index) / 50.0)
            }
            SpecialToken::Blank => "<blank>".to_string(),
        }
    }
}

impl fmt::Display for SpecialToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TimestampError {
    #[error("timestamp {0} s is out of range [0, 30.01]")]
    OutOfRange(f64),
}

/// Quantizes a time offset to the nearest 20 ms grid point.
///
/// Ties round away from zero. Values within one half-step above 30.0 s
/// clamp to index 1500; anything further out of range is rejected.
pub fn quantize_timestamp(seconds: f64) -> Result<SpecialToken, TimestampError> {
    if !seconds.is_finite() || !(0.0..=30.01).contains(&seconds) {
        return Err(TimestampError::OutOfRange(seconds));
    }
    let index = (seconds * 50.0).round() as u16;
    Ok(SpecialToken::Timestamp(index.min(MAX_TIMESTAMP_INDEX)))
}

/// Seconds value of a timestamp index. Dividing by 50 is correctly
/// rounded, so grid values compare equal to their decimal literals
/// (`timestamp_seconds(1426) == 28.52`).
pub fn timestamp_seconds(index: u16) -> f64 {
    f64::from(index) / 50.0
}

/// Validates a language / translation-target code: 2–3 lowercase ASCII letters.
pub fn is_well_formed_code(code: &str) -> bool {
    (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase())
}
