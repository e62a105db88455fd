//! Long-form training sample construction and dataset plumbing.
//!
//! Consecutive utterances from the same talk are concatenated into windows
//! of at most 30 seconds, encoded, filtered by token count, and partitioned
//! into shards consumed by independent data iterators. All operations are
//! deterministic given their seeds, so parallel and serial runs agree.

use std::collections::HashMap;
use std::io::{self, BufRead};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::token_format::{
    encode_record, quantize_timestamp, timestamp_seconds, MultitaskRecord, Segment, SpecialToken,
    Task, Vocabulary,
};

/// One manifest entry: a timed utterance inside a long talk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceSegment {
    pub talk_id: String,
    pub start: f64,
    pub end: f64,
    pub text: String,
    pub language: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub translations: Option<HashMap<String, String>>,
}

/// A ≤30 s training window built from consecutive segments of one talk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongFormSample {
    pub id: String,
    pub talk_id: String,
    /// Window anchor in talk time (first segment's start).
    pub window_start: f64,
    pub duration: f64,
    /// Target record with timestamps re-based to the window start.
    pub record: MultitaskRecord,
    /// Manifest indices of the contained segments.
    pub source_segment_ids: Vec<usize>,
    /// True when a single segment alone exceeded the window; its end
    /// timestamp is clamped to 30 s and the caller decides what to do.
    pub oversized: bool,
}

#[derive(Debug, Error)]
pub enum DataPrepError {
    #[error("segments must be sorted by (talk_id, start): segment {index} is out of order")]
    UnsortedSegments { index: usize },
    #[error("segment {index} overlaps the previous one in talk {talk_id}")]
    OverlappingSegments { index: usize, talk_id: String },
    #[error("segment {index}: start {start} must be >= 0 and < end {end}")]
    BadSegmentTimes { index: usize, start: f64, end: f64 },
    #[error("{0} shards requested for {1} samples")]
    TooManyShards(usize, usize),
    #[error("shard count must be at least 1")]
    ZeroShards,
    #[error("fraction {0} is out of (0, 1]")]
    BadFraction(f64),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Groups consecutive same-talk segments into ≤`max_duration` windows.
///
/// Greedy left-to-right: a segment joins the current group iff
/// `segment.end - window_start <= max_duration`; otherwise it opens a new
/// group anchored at its own start. Silence between utterances counts
/// toward the window, keeping audio slicing consistent with the record.
/// A single segment longer than the window is emitted alone with the
/// `oversized` flag set.
pub fn concatenate_segments(
    segments: &[UtteranceSegment],
    max_duration: f64,
) -> Result<Vec<LongFormSample>, DataPrepError> {
    for (index, seg) in segments.iter().enumerate() {
        if !(seg.start >= 0.0 && seg.start < seg.end) {
            return Err(DataPrepError::BadSegmentTimes {
                index,
                start: seg.start,
                end: seg.end,
            });
        }
        if index > 0 {
            let prev = &segments[index - 1];
            if prev.talk_id == seg.talk_id {
                if seg.start < prev.start {
                    return Err(DataPrepError::UnsortedSegments { index });
                }
                if seg.start < prev.end {
                    return Err(DataPrepError::OverlappingSegments {
                        index,
                        talk_id: seg.talk_id.clone(),
                    });
                }
            }
        }
    }

    let mut samples = Vec::new();
    let mut group: Vec<usize> = Vec::new();
    let mut per_talk_seq: HashMap<&str, usize> = HashMap::new();

    let mut flush = |group: &mut Vec<usize>, samples: &mut Vec<LongFormSample>| {
        if group.is_empty() {
            return;
        }
        let first = &segments[group[0]];
        let last = &segments[*group.last().unwrap()];
        let window_start = first.start;
        let duration = last.end - window_start;
        let oversized = duration > max_duration;
        let record_segments = group
            .iter()
            .map(|&i| {
                let seg = &segments[i];
                let rebase = |t: f64| -> f64 {
                    let clamped = (t - window_start).min(30.0);
                    let SpecialToken::Timestamp(index) =
                        quantize_timestamp(clamped).expect("clamped into range")
                    else {
                        unreachable!()
                    };
                    timestamp_seconds(index)
                };
                Segment::timed(rebase(seg.start), seg.text.clone(), rebase(seg.end))
            })
            .collect();
        let seq = per_talk_seq.entry(&first.talk_id).or_insert(0);
        let sample = LongFormSample {
            id: format!("{}-{:04}", first.talk_id, *seq),
            talk_id: first.talk_id.clone(),
            window_start,
            duration,
            record: MultitaskRecord {
                prompt: None,
                language: first.language.clone(),
                task: Task::Asr,
                segments: record_segments,
                timestamps_enabled: true,
            },
            source_segment_ids: group.clone(),
            oversized,
        };
        *seq += 1;
        samples.push(sample);
        group.clear();
    };

    for (index, seg) in segments.iter().enumerate() {
        let joins = if let Some(&first) = group.first() {
            let anchor = &segments[first];
            anchor.talk_id == seg.talk_id && seg.end - anchor.start <= max_duration
        } else {
            false
        };
        if !joins {
            flush(&mut group, &mut samples);
        }
        group.push(index);
    }
    flush(&mut group, &mut samples);
    Ok(samples)
}

/// Why a sample was routed to the dropped list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedSample {
    pub id: String,
    pub reason: String,
}

/// Splits samples into (kept, dropped) by encoded length. A sample is
/// dropped iff its full token sequence — prompt and target included — is
/// strictly longer than `max_tokens`. Unencodable samples are dropped with
/// the encoder's message rather than failing the batch.
pub fn filter_by_length(
    samples: Vec<LongFormSample>,
    vocab: &Vocabulary,
    max_tokens: usize,
) -> (Vec<LongFormSample>, Vec<DroppedSample>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for sample in samples {
        match encode_record(&sample.record, vocab) {
            Ok(ids) if ids.len() > max_tokens => dropped.push(DroppedSample {
                id: sample.id,
                reason: format!("{} tokens exceeds the {max_tokens}-token limit", ids.len()),
            }),
            Ok(_) => kept.push(sample),
            Err(e) => dropped.push(DroppedSample {
                id: sample.id,
                reason: format!("unencodable: {e}"),
            }),
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShardPolicy {
    RoundRobin,
    Hash,
}

/// Disjoint assignment of sample ids to `n_shards` subsets.
///
/// The recommended shard count is 5 to 12; other values work but callers
/// should surface a warning. Round-robin balances sizes to within one;
/// the hash policy trades balance for stability under insertions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShardAssignment {
    pub n_shards: usize,
    pub shard_of: HashMap<String, usize>,
}

/// Recommended shard-count range.
pub const SHARD_RANGE: std::ops::RangeInclusive<usize> = 5..=12;

impl ShardAssignment {
    /// Ids of one shard, in the original id order.
    pub fn shard<'a>(&self, ids: &'a [String], shard: usize) -> Vec<&'a String> {
        ids.iter().filter(|id| self.shard_of[*id] == shard).collect()
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_shards];
        for &s in self.shard_of.values() {
            sizes[s] += 1;
        }
        sizes
    }
}

/// Assigns each id to a shard. Deterministic for a given (policy, seed);
/// round-robin ignores the seed, the hash policy folds it into a stable
/// FNV-1a hash so assignments never depend on platform hasher state.
pub fn partition_shards(
    sample_ids: &[String],
    n_shards: usize,
    policy: ShardPolicy,
    seed: u64,
) -> Result<ShardAssignment, DataPrepError> {
    if n_shards == 0 {
        return Err(DataPrepError::ZeroShards);
    }
    if n_shards > sample_ids.len() {
        return Err(DataPrepError::TooManyShards(n_shards, sample_ids.len()));
    }
    let shard_of = match policy {
        ShardPolicy::RoundRobin => sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i % n_shards))
            .collect(),
        ShardPolicy::Hash => sample_ids
            .iter()
            .map(|id| (id.clone(), (fnv1a(id.as_bytes(), seed) % n_shards as u64) as usize))
            .collect(),
    };
    Ok(ShardAssignment { n_shards, shard_of })
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Uniform reservoir sample of up to `n` lines from a stream that may not
/// fit in memory. Single pass, O(n) memory, deterministic per seed.
pub fn sample_transcripts<E>(
    lines: impl IntoIterator<Item = Result<String, E>>,
    n: usize,
    seed: u64,
) -> Result<Vec<String>, E> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<String> = Vec::with_capacity(n.min(4096));
    if n == 0 {
        for line in lines {
            line?;
        }
        return Ok(reservoir);
    }
    for (i, line) in lines.into_iter().enumerate() {
        let line = line?;
        if i < n {
            reservoir.push(line);
        } else {
            let j = rng.gen_range(0..=i);
            if j < n {
                reservoir[j] = line;
            }
        }
    }
    Ok(reservoir)
}

/// Deterministic uniform subsample of ⌈fraction·N⌉ items, keeping input
/// order. Used to validate on a fraction of the full validation set.
pub fn subsample_validation<T: Clone>(
    samples: &[T],
    fraction: f64,
    seed: u64,
) -> Result<Vec<T>, DataPrepError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataPrepError::BadFraction(fraction));
    }
    let n = samples.len();
    let k = (fraction * n as f64).ceil() as usize;
    if k >= n {
        return Ok(samples.to_vec());
    }
    // Partial Fisher-Yates over indices, then restore input order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut chosen = indices[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| samples[i].clone()).collect())
}

/// Pads with trailing zeros or truncates so the output is exactly
/// `target_seconds` long at the given rate.
pub fn pad_or_trim_audio(audio: &[f32], target_seconds: f64, rate: u32) -> Vec<f32> {
    assert!(rate > 0, "sample rate must be positive");
    let target_len = (target_seconds * f64::from(rate)).round() as usize;
    let mut out = Vec::with_capacity(target_len);
    out.extend_from_slice(&audio[..audio.len().min(target_len)]);
    out.resize(target_len, 0.0);
    out
}

/// Reads a JSONL manifest, one [`UtteranceSegment`] per line.
pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<UtteranceSegment>, DataPrepError> {
    let mut segments = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seg: UtteranceSegment =
            serde_json::from_str(&line).map_err(|e| DataPrepError::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
        segments.push(seg);
    }
    Ok(segments)
}
