//! Autoregressive step scorers: the abstract interface plus a table-driven
//! implementation used for mocking trained decoders.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logmath::log_sum_exp;
use super::DecoderError;

/// One autoregressive decoding step: log probabilities of the next token
/// given the full token prefix (forced context included).
///
/// Implementations must be deterministic — the same prefix always yields
/// the same vector — and safe for concurrent read-only use, so independent
/// utterances can decode in parallel.
pub trait StepScorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Returns a normalized log-probability vector of length
    /// [`StepScorer::vocab_size`].
    fn score(&self, prefix: &[u32]) -> Vec<f64>;
}

/// Deterministic scorer backed by a prefix → distribution table, with a
/// fallback row for prefixes the table does not list.
#[derive(Debug, Clone)]
pub struct TableScorer {
    vocab_size: usize,
    rows: HashMap<Vec<u32>, Vec<f64>>,
    fallback: Vec<f64>,
}

impl TableScorer {
    /// Builds from non-negative weights; every row is normalized to a
    /// distribution before taking logs.
    pub fn from_weights(
        fallback: &[f64],
        rows: impl IntoIterator<Item = (Vec<u32>, Vec<f64>)>,
    ) -> Result<Self, DecoderError> {
        let vocab_size = fallback.len();
        let mut table = HashMap::new();
        for (prefix, weights) in rows {
            if weights.len() != vocab_size {
                return Err(DecoderError::ScorerRowLength {
                    expected: vocab_size,
                    found: weights.len(),
                });
            }
            table.insert(prefix, normalize_weights(&weights));
        }
        Ok(TableScorer {
            vocab_size,
            rows: table,
            fallback: normalize_weights(fallback),
        })
    }

    pub fn from_log_rows(
        fallback: Vec<f64>,
        rows: impl IntoIterator<Item = (Vec<u32>, Vec<f64>)>,
    ) -> Result<Self, DecoderError> {
        let vocab_size = fallback.len();
        let mut table = HashMap::new();
        for (prefix, row) in rows {
            if row.len() != vocab_size {
                return Err(DecoderError::ScorerRowLength {
                    expected: vocab_size,
                    found: row.len(),
                });
            }
            table.insert(prefix, log_softmax(&row));
        }
        Ok(TableScorer {
            vocab_size,
            rows: table,
            fallback: log_softmax(&fallback),
        })
    }
}

fn normalize_weights(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / total).ln()).collect()
}

/// Renormalizes a log vector so its logsumexp is exactly 0.
fn log_softmax(row: &[f64]) -> Vec<f64> {
    let norm = log_sum_exp(row);
    row.iter().map(|x| x - norm).collect()
}

impl StepScorer for TableScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score(&self, prefix: &[u32]) -> Vec<f64> {
        self.rows.get(prefix).unwrap_or(&self.fallback).clone()
    }
}

/// On-disk form: prefixes are space-joined ids ("" for the empty prefix);
/// rows hold log probabilities and are renormalized on load.
#[derive(Serialize, Deserialize)]
struct TableScorerFile {
    vocab_size: usize,
    fallback: Vec<f64>,
    rows: HashMap<String, Vec<f64>>,
}

pub fn write_table_scorer<W: Write>(scorer: &TableScorer, w: W) -> Result<(), DecoderError> {
    let file = TableScorerFile {
        vocab_size: scorer.vocab_size,
        fallback: scorer.fallback.clone(),
        rows: scorer
            .rows
            .iter()
            .map(|(prefix, row)| {
                let key = prefix
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join(" ");
                (key, row.clone())
            })
            .collect(),
    };
    serde_json::to_writer(w, &file).map_err(|e| DecoderError::File(e.to_string()))
}

pub fn read_table_scorer<R: Read>(r: R) -> Result<TableScorer, DecoderError> {
    let file: TableScorerFile =
        serde_json::from_reader(r).map_err(|e| DecoderError::File(e.to_string()))?;
    if file.fallback.len() != file.vocab_size {
        return Err(DecoderError::ScorerRowLength {
            expected: file.vocab_size,
            found: file.fallback.len(),
        });
    }
    let mut rows = Vec::with_capacity(file.rows.len());
    for (key, row) in file.rows {
        let prefix = if key.is_empty() {
            Vec::new()
        } else {
            key.split(' ')
                .map(|s| {
                    s.parse::<u32>()
                        .map_err(|_| DecoderError::File(format!("bad prefix key {key:?}")))
                })
                .collect::<Result<Vec<u32>, _>>()?
        };
        rows.push((prefix, row));
    }
    TableScorer::from_log_rows(file.fallback, rows)
}

pub fn read_table_scorer_file<P: AsRef<Path>>(path: P) -> Result<TableScorer, DecoderError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_table_scorer(file)
}
