//! Lossless conversion between [`MultitaskRecord`]s and token-id sequences.
//!
//! Layout: `[SOP prompt-pieces]? SOS <lang> <task> body EOS`. A timestamped
//! body is `(<start> pieces <end>)*`; an untimed body is a bare piece run.
//! The mode is recoverable from the first body token, so no dedicated
//! "no-timestamps" marker exists.

use thiserror::Error;

use super::record::{MultitaskRecord, RecordError, Segment, Task};
use super::special::{timestamp_seconds, quantize_timestamp, SpecialToken};
use super::vocab::{Token, Vocabulary};
use crate::bpe::{segment_with_pieces, SegmentError};

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("invalid record: {0}")]
    Record(#[from] RecordError),
    #[error("{location}: {source}")]
    Unencodable {
        location: String,
        source: SegmentError,
    },
}

/// Parse failure with the index of the offending token.
#[derive(Debug, Error, PartialEq)]
#[error("parse error at position {position}: {kind}")]
pub struct TokenParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("empty token sequence")]
    Empty,
    #[error("expected SOS or SOP")]
    ExpectedSos,
    #[error("expected a language token")]
    ExpectedLanguage,
    #[error("expected a task token")]
    ExpectedTask,
    #[error("token id {0} is out of the vocabulary range")]
    UnknownId(u32),
    #[error("blank token inside a text sequence")]
    Blank,
    #[error("unexpected token {0}")]
    Unexpected(String),
    #[error("sequence ended without EOS")]
    Truncated,
    #[error("tokens after EOS")]
    TrailingTokens,
    #[error("segment end {end:.2} precedes its start {start:.2}")]
    EndBeforeStart { start: f64, end: f64 },
    #[error("segment start {start:.2} precedes previous start {previous:.2}")]
    StartsOutOfOrder { start: f64, previous: f64 },
    #[error("segment is missing its end timestamp")]
    OpenSegment,
}

/// Serializes a record to token ids. Fails if the record violates its
/// invariants or some text has no piece segmentation.
pub fn encode_record(record: &MultitaskRecord, vocab: &Vocabulary) -> Result<Vec<u32>, EncodeError> {
    record.validate_against(vocab)?;
    let mut ids = Vec::new();
    if let Some(prompt) = &record.prompt {
        ids.push(vocab.sop_id());
        encode_text_into(&mut ids, prompt, vocab, || "prompt".to_string())?;
    }
    ids.push(vocab.sos_id());
    ids.push(vocab.language_id(&record.language).expect("validated"));
    match &record.task {
        Task::Asr => ids.push(vocab.asr_id()),
        Task::St { target } => ids.push(vocab.st_id(target).expect("validated")),
    }
    for (i, segment) in record.segments.iter().enumerate() {
        if record.timestamps_enabled {
            let SpecialToken::Timestamp(index) =
                quantize_timestamp(segment.start.expect("validated")).expect("validated")
            else {
                unreachable!()
            };
            ids.push(vocab.timestamp_id(index));
        }
        encode_text_into(&mut ids, &segment.text, vocab, || format!("segment {i}"))?;
        if record.timestamps_enabled {
            let SpecialToken::Timestamp(index) =
                quantize_timestamp(segment.end.expect("validated")).expect("validated")
            else {
                unreachable!()
            };
            ids.push(vocab.timestamp_id(index));
        }
    }
    ids.push(vocab.eos_id());
    Ok(ids)
}

fn encode_text_into(
    ids: &mut Vec<u32>,
    text: &str,
    vocab: &Vocabulary,
    location: impl Fn() -> String,
) -> Result<(), EncodeError> {
    let pieces = segment_with_pieces(text, vocab.max_piece_len(), |s| {
        vocab.piece_id(s).is_some()
    })
    .map_err(|source| EncodeError::Unencodable {
        location: location(),
        source,
    })?;
    ids.extend(pieces.iter().map(|p| vocab.piece_id(p).expect("from inventory")));
    Ok(())
}

/// Result of a lenient parse: a valid record plus, possibly, a trailing
/// segment that has a start timestamp but ran out before its end.
#[derive(Debug, Clone, PartialEq)]
pub struct LenientDecode {
    pub record: MultitaskRecord,
    pub open_segment: Option<Segment>,
}

/// Strict inverse of [`encode_record`]: every decoded record satisfies the
/// [`MultitaskRecord`] invariants, and `decode_tokens(encode_record(r)) == r`
/// for every valid `r`.
pub fn decode_tokens(ids: &[u32], vocab: &Vocabulary) -> Result<MultitaskRecord, TokenParseError> {
    let decoded = decode_tokens_inner(ids, vocab, false)?;
    debug_assert!(decoded.open_segment.is_none());
    Ok(decoded.record)
}

/// Like [`decode_tokens`] but tolerates a final segment with a start and no
/// end, as produced when decoding runs into the end of a window. The closed
/// part of the record still satisfies every invariant.
pub fn decode_tokens_lenient(
    ids: &[u32],
    vocab: &Vocabulary,
) -> Result<LenientDecode, TokenParseError> {
    decode_tokens_inner(ids, vocab, true)
}

struct TokenCursor<'a> {
    ids: &'a [u32],
    vocab: &'a Vocabulary,
    pos: usize,
}

impl<'a> TokenCursor<'a> {
    fn peek(&self) -> Result<Option<Token<'a>>, TokenParseError> {
        let Some(&id) = self.ids.get(self.pos) else {
            return Ok(None);
        };
        let token = self.vocab.token(id).ok_or(TokenParseError {
            position: self.pos,
            kind: ParseErrorKind::UnknownId(id),
        })?;
        if matches!(token, Token::Special(SpecialToken::Blank)) {
            return Err(self.error(ParseErrorKind::Blank));
        }
        Ok(Some(token))
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    fn error(&self, kind: ParseErrorKind) -> TokenParseError {
        TokenParseError {
            position: self.pos,
            kind,
        }
    }

    fn truncated(&self) -> TokenParseError {
        TokenParseError {
            position: self.ids.len(),
            kind: ParseErrorKind::Truncated,
        }
    }

    /// Collects a (possibly empty) run of pieces.
    fn piece_run(&mut self) -> Result<String, TokenParseError> {
        let mut text = String::new();
        while let Some(Token::Piece(p)) = self.peek()? {
            text.push_str(p);
            self.advance();
        }
        Ok(text)
    }
}

fn decode_tokens_inner(
    ids: &[u32],
    vocab: &Vocabulary,
    lenient: bool,
) -> Result<LenientDecode, TokenParseError> {
    let mut cur = TokenCursor { ids, vocab, pos: 0 };

    if ids.is_empty() {
        return Err(cur.error(ParseErrorKind::Empty));
    }

    // Optional prompt block.
    let mut prompt = None;
    if matches!(cur.peek()?, Some(Token::Special(SpecialToken::Sop))) {
        cur.advance();
        prompt = Some(cur.piece_run()?);
    }

    match cur.peek()? {
        Some(Token::Special(SpecialToken::Sos)) => cur.advance(),
        Some(_) => return Err(cur.error(ParseErrorKind::ExpectedSos)),
        None => return Err(cur.truncated()),
    }

    let language = match cur.peek()? {
        Some(Token::Special(SpecialToken::Language(code))) => {
            let code = code.clone();
            cur.advance();
            code
        }
        Some(_) => return Err(cur.error(ParseErrorKind::ExpectedLanguage)),
        None => return Err(cur.truncated()),
    };

    let task = match cur.peek()? {
        Some(Token::Special(SpecialToken::TaskAsr)) => {
            cur.advance();
            Task::Asr
        }
        Some(Token::Special(SpecialToken::TaskSt(target))) => {
            let target = target.clone();
            cur.advance();
            Task::St { target }
        }
        Some(_) => return Err(cur.error(ParseErrorKind::ExpectedTask)),
        None => return Err(cur.truncated()),
    };

    let mut segments = Vec::new();
    let mut open_segment = None;
    let timestamps_enabled;
    match cur.peek()? {
        None => return Err(cur.truncated()),
        Some(Token::Special(SpecialToken::Eos)) => {
            cur.advance();
            timestamps_enabled = false;
        }
        Some(Token::Piece(_)) => {
            timestamps_enabled = false;
            let text = cur.piece_run()?;
            segments.push(Segment::untimed(text));
            match cur.peek()? {
                Some(Token::Special(SpecialToken::Eos)) => cur.advance(),
                Some(t) => return Err(cur.error(ParseErrorKind::Unexpected(render(&t)))),
                None => return Err(cur.truncated()),
            }
        }
        Some(Token::Special(SpecialToken::Timestamp(_))) => {
            timestamps_enabled = true;
            let mut previous_start = f64::NEG_INFINITY;
            loop {
                // Segment start.
                let start = match cur.peek()? {
                    Some(Token::Special(SpecialToken::Timestamp(i))) => {
                        let start = timestamp_seconds(*i);
                        if start < previous_start {
                            return Err(cur.error(ParseErrorKind::StartsOutOfOrder {
                                start,
                                previous: previous_start,
                            }));
                        }
                        previous_start = start;
                        cur.advance();
                        start
                    }
                    Some(Token::Special(SpecialToken::Eos)) => {
                        cur.advance();
                        break;
                    }
                    Some(t) => return Err(cur.error(ParseErrorKind::Unexpected(render(&t)))),
                    None => return Err(cur.truncated()),
                };
                let text = cur.piece_run()?;
                // Segment end.
                match cur.peek()? {
                    Some(Token::Special(SpecialToken::Timestamp(i))) => {
                        let end = timestamp_seconds(*i);
                        if end < start {
                            return Err(cur.error(ParseErrorKind::EndBeforeStart { start, end }));
                        }
                        cur.advance();
                        segments.push(Segment::timed(start, text, end));
                    }
                    Some(Token::Special(SpecialToken::Eos)) if lenient => {
                        cur.advance();
                        open_segment = Some(Segment {
                            start: Some(start),
                            text,
                            end: None,
                        });
                        break;
                    }
                    None if lenient => {
                        open_segment = Some(Segment {
                            start: Some(start),
                            text,
                            end: None,
                        });
                        break;
                    }
                    Some(Token::Special(SpecialToken::Eos)) => {
                        return Err(cur.error(ParseErrorKind::OpenSegment))
                    }
                    Some(t) => return Err(cur.error(ParseErrorKind::Unexpected(render(&t)))),
                    None => return Err(cur.truncated()),
                }
            }
        }
        Some(t) => return Err(cur.error(ParseErrorKind::Unexpected(render(&t)))),
    }

    if cur.pos < ids.len() {
        return Err(cur.error(ParseErrorKind::TrailingTokens));
    }

    let record = MultitaskRecord {
        prompt,
        language,
        task,
        segments,
        timestamps_enabled,
    };
    // A lenient parse may leave only the open segment behind, in which case
    // the closed record is an empty timed one and is exempt from validation.
    debug_assert!(
        (open_segment.is_some() && record.segments.is_empty()) || record.validate().is_ok(),
        "decoded record violates invariants: {:?}",
        record.validate()
    );
    Ok(LenientDecode {
        record,
        open_segment,
    })
}

fn render(token: &Token<'_>) -> String {
    match token {
        Token::Special(s) => s.render(),
        Token::Piece(p) => format!("{p:?}"),
    }
}
