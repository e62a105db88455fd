//! Structured form of one multitask training target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::special::is_well_formed_code;
use super::vocab::Vocabulary;

/// Task requested from the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Asr,
    St { target: String },
}

/// One timed (or untimed) stretch of target text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start: Option<f64>,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end: Option<f64>,
}

impl Segment {
    pub fn timed(start: f64, text: impl Into<String>, end: f64) -> Self {
        Segment {
            start: Some(start),
            text: text.into(),
            end: Some(end),
        }
    }

    pub fn untimed(text: impl Into<String>) -> Self {
        Segment {
            start: None,
            text: text.into(),
            end: None,
        }
    }
}

/// One training target: optional prompt, language, task, and text segments.
///
/// With timestamps enabled the record has at least one segment, every
/// segment carries a start and end on the 20 ms grid, starts are
/// nondecreasing and all times lie in [0, 30]. Without timestamps the
/// record holds at most one segment — the token layout has no separator
/// between untimed segments, so more than one could not be recovered
/// from the ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prompt: Option<String>,
    pub language: String,
    pub task: Task,
    pub segments: Vec<Segment>,
    pub timestamps_enabled: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("language code {0:?} is malformed")]
    MalformedLanguage(String),
    #[error("translation target {0:?} is malformed")]
    MalformedTarget(String),
    #[error("language {0:?} is not in the vocabulary")]
    UnknownLanguage(String),
    #[error("translation target {0:?} is not in the vocabulary")]
    UnknownTarget(String),
    #[error("segment {index}: timestamps required when timestamps are enabled")]
    MissingTimestamp { index: usize },
    #[error("segment {index}: timestamps present but timestamps are disabled")]
    UnexpectedTimestamp { index: usize },
    #[error("segment {index}: times {start}..{end} outside [0, 30] or reversed")]
    BadTimeRange { index: usize, start: f64, end: f64 },
    #[error("segment {index}: start {start} precedes previous segment start {previous}")]
    StartsOutOfOrder {
        index: usize,
        start: f64,
        previous: f64,
    },
    #[error("untimed records hold at most one segment, found {0}")]
    TooManyUntimedSegments(usize),
    #[error("timestamped records need at least one segment")]
    EmptyTimedRecord,
    #[error("an untimed segment needs text; drop the segment instead")]
    EmptyUntimedSegment,
}

impl MultitaskRecord {
    /// Checks the structural invariants, without touching any vocabulary.
    pub fn validate(&self) -> Result<(), RecordError> {
        if !is_well_formed_code(&self.language) {
            return Err(RecordError::MalformedLanguage(self.language.clone()));
        }
        if let Task::St { target } = &self.task {
            if !is_well_formed_code(target) {
                return Err(RecordError::MalformedTarget(target.clone()));
            }
        }
        if self.timestamps_enabled {
            // An empty timed record would serialize identically to an untimed
            // one; the mode must be recoverable from the first body token.
            if self.segments.is_empty() {
                return Err(RecordError::EmptyTimedRecord);
            }
            let mut previous = f64::NEG_INFINITY;
            for (index, seg) in self.segments.iter().enumerate() {
                let (Some(start), Some(end)) = (seg.start, seg.end) else {
                    return Err(RecordError::MissingTimestamp { index });
                };
                if !(0.0..=30.0).contains(&start) || !(0.0..=30.0).contains(&end) || start > end {
                    return Err(RecordError::BadTimeRange { index, start, end });
                }
                if start < previous {
                    return Err(RecordError::StartsOutOfOrder {
                        index,
                        start,
                        previous,
                    });
                }
                previous = start;
            }
        } else {
            if self.segments.len() > 1 {
                return Err(RecordError::TooManyUntimedSegments(self.segments.len()));
            }
            for (index, seg) in self.segments.iter().enumerate() {
                if seg.start.is_some() || seg.end.is_some() {
                    return Err(RecordError::UnexpectedTimestamp { index });
                }
                // An empty untimed segment would serialize the same as no
                // segment at all.
                if seg.text.is_empty() {
                    return Err(RecordError::EmptyUntimedSegment);
                }
            }
        }
        Ok(())
    }

    /// Validates against a vocabulary: codes must have tokens.
    pub fn validate_against(&self, vocab: &Vocabulary) -> Result<(), RecordError> {
        self.validate()?;
        if vocab.language_id(&self.language).is_none() {
            return Err(RecordError::UnknownLanguage(self.language.clone()));
        }
        if let Task::St { target } = &self.task {
            if vocab.st_id(target).is_none() {
                return Err(RecordError::UnknownTarget(target.clone()));
            }
        }
        Ok(())
    }

    /// Concatenated text of all segments.
    pub fn text(&self) -> String {
        self.segments.iter().map(|s| s.text.as_str()).collect()
    }
}
