//! Multitask token format: vocabulary, special tokens, and the record codec.
//!
//! Targets are token sequences with two parts separated by special tokens:
//! an optional prompt (after `<sop>`) and the actual target (after `<sos>`),
//! which opens with a language token and a task token and closes with
//! `<eos>`. Utterance-level timestamps are quantized to a 20 ms grid and
//! represented as dedicated tokens `<0.00>` … `<30.00>`.
//!
//! [`Vocabulary`] is immutable after construction; everything here is a pure
//! function of its inputs and safe for unrestricted concurrent reads.

mod codec;
mod record;
mod special;
mod vocab;

pub use codec::{
    decode_tokens, decode_tokens_lenient, encode_record, EncodeError, LenientDecode,
    ParseErrorKind, TokenParseError,
};
pub use record::{MultitaskRecord, RecordError, Segment, Task};
pub use special::{
    is_well_formed_code, quantize_timestamp, timestamp_seconds, SpecialToken, TimestampError,
    MAX_TIMESTAMP_INDEX, NUM_TIMESTAMP_TOKENS, TIMESTAMP_STEP_SECONDS,
};
pub use vocab::{Token, VocabError, Vocabulary};
