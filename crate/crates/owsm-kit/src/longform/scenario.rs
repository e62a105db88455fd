//! Scripted mock acoustic models, loadable from a JSON scenario file so
//! long-form integration tests are fully declarative.
//!
//! Each chunk script carries a small integer marker. The scenario audio is
//! silence with one marker sample written at each chunk's expected cursor;
//! the mock model recovers the marker from the first sample of the padded
//! chunk it receives and replies with that chunk's lattice and scorer
//! table. Responses therefore depend only on chunk content, never on call
//! order.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AcousticModel, ChunkModel, LongformError};
use crate::decoder::{
    read_lattice, read_table_scorer_file, write_lattice_json, write_table_scorer, LogProbLattice,
    TableScorer,
};
use crate::token_format::{Task, Vocabulary, TIMESTAMP_STEP_SECONDS};

/// Marker samples are stored as marker / [`MARKER_SCALE`]; small integers
/// divided by a power of two stay exact in f32.
pub const MARKER_SCALE: f32 = 1024.0;

#[derive(Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub sample_rate: u32,
    pub duration_seconds: f64,
    pub language: String,
    /// "asr" or "st:<target code>".
    pub task: String,
    pub vocab: ScenarioVocab,
    pub chunks: Vec<ScenarioChunk>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioVocab {
    pub pieces: Vec<String>,
    pub languages: Vec<String>,
    #[serde(default)]
    pub st_targets: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioChunk {
    /// Non-zero marker embedded in the audio at `expected_cursor`.
    pub marker: u32,
    /// Where the driver is expected to be when this chunk is decoded.
    pub expected_cursor: f64,
    /// Inline lattice (the lattice-file JSON schema) …
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lattice: Option<serde_json::Value>,
    /// … or a path relative to the scenario file.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lattice_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scorer: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scorer_file: Option<String>,
}

impl Scenario {
    pub fn from_reader<R: Read>(r: R) -> Result<Scenario, LongformError> {
        serde_json::from_reader(r).map_err(|e| LongformError::Scenario(e.to_string()))
    }

    pub fn read_from_file<P: AsRef<Path>>(path: P) -> Result<Scenario, LongformError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Scenario::from_reader(file)
    }

    pub fn build_vocabulary(&self) -> Result<Vocabulary, LongformError> {
        Vocabulary::build(
            &self.vocab.pieces,
            &self.vocab.languages,
            &self.vocab.st_targets,
        )
        .map_err(|e| LongformError::Scenario(format!("vocabulary: {e}")))
    }

    pub fn parse_task(&self) -> Result<Task, LongformError> {
        if self.task == "asr" {
            return Ok(Task::Asr);
        }
        if let Some(target) = self.task.strip_prefix("st:") {
            return Ok(Task::St {
                target: target.to_string(),
            });
        }
        Err(LongformError::Scenario(format!(
            "task must be \"asr\" or \"st:<code>\", found {:?}",
            self.task
        )))
    }

    /// Synthesized scenario audio: silence with one marker sample at each
    /// chunk's expected cursor.
    pub fn build_audio(&self) -> Result<Vec<f32>, LongformError> {
        let samples_per_step =
            (f64::from(self.sample_rate) * TIMESTAMP_STEP_SECONDS).round() as usize;
        if samples_per_step == 0 {
            return Err(LongformError::Scenario("sample rate too low".into()));
        }
        let len = (self.duration_seconds * f64::from(self.sample_rate)).round() as usize;
        let mut audio = vec![0.0f32; len];
        for chunk in &self.chunks {
            if chunk.marker == 0 {
                return Err(LongformError::Scenario("chunk markers must be non-zero".into()));
            }
            let step = (chunk.expected_cursor / TIMESTAMP_STEP_SECONDS).round() as usize;
            let pos = step * samples_per_step;
            if pos >= len {
                return Err(LongformError::Scenario(format!(
                    "expected cursor {} is outside the audio",
                    chunk.expected_cursor
                )));
            }
            audio[pos] = chunk.marker as f32 / MARKER_SCALE;
        }
        Ok(audio)
    }

    /// Builds the mock model, resolving file references against `base_dir`.
    pub fn build_model(&self, base_dir: &Path) -> Result<ScriptedModel, LongformError> {
        let mut responses = HashMap::new();
        for chunk in &self.chunks {
            let lattice = match (&chunk.lattice, &chunk.lattice_file) {
                (Some(value), None) => {
                    crate::decoder::read_lattice_json(value.to_string().as_bytes())?
                }
                (None, Some(file)) => read_lattice(base_dir.join(file))?,
                _ => {
                    return Err(LongformError::Scenario(format!(
                        "chunk {} needs exactly one of lattice / lattice_file",
                        chunk.marker
                    )))
                }
            };
            let scorer = match (&chunk.scorer, &chunk.scorer_file) {
                (Some(value), None) => {
                    crate::decoder::read_table_scorer(value.to_string().as_bytes())?
                }
                (None, Some(file)) => read_table_scorer_file(base_dir.join(file))?,
                _ => {
                    return Err(LongformError::Scenario(format!(
                        "chunk {} needs exactly one of scorer / scorer_file",
                        chunk.marker
                    )))
                }
            };
            if responses.insert(chunk.marker, (lattice, scorer)).is_some() {
                return Err(LongformError::Scenario(format!(
                    "duplicate marker {}",
                    chunk.marker
                )));
            }
        }
        Ok(ScriptedModel { responses })
    }

    pub fn expected_cursors(&self) -> Vec<f64> {
        self.chunks.iter().map(|c| c.expected_cursor).collect()
    }
}

/// Mock acoustic model that answers by the marker found in the chunk.
pub struct ScriptedModel {
    responses: HashMap<u32, (LogProbLattice, TableScorer)>,
}

impl ScriptedModel {
    pub fn new(responses: HashMap<u32, (LogProbLattice, TableScorer)>) -> Self {
        ScriptedModel { responses }
    }
}

impl AcousticModel for ScriptedModel {
    fn process_chunk(
        &self,
        chunk: &[f32],
        _sample_rate: u32,
    ) -> Result<ChunkModel, Box<dyn std::error::Error + Send + Sync>> {
        let marker = (chunk.first().copied().unwrap_or(0.0) * MARKER_SCALE).round() as u32;
        let (lattice, scorer) = self
            .responses
            .get(&marker)
            .ok_or_else(|| format!("no scripted response for marker {marker}"))?;
        Ok(ChunkModel {
            lattice: lattice.clone(),
            scorer: Box::new(scorer.clone()),
        })
    }
}

/// Builds a (lattice, scorer) pair that makes every decoding algorithm
/// reproduce `tokens` after `context`.
///
/// The scorer table walks the token sequence with high confidence and ends
/// with EOS; its fallback row also favors EOS so stray prefixes terminate.
/// The lattice is a near-one-hot canonical alignment of the non-timestamp
/// tokens (with separating blanks for repeats), so CTC greedy collapses to
/// them and the CTC prefix score backs the same sequence during joint
/// search.
pub fn script_chunk(
    vocab: &Vocabulary,
    context: &[u32],
    tokens: &[u32],
) -> (LogProbLattice, TableScorer) {
    let vocab_size = vocab.len();
    let blank = vocab.blank_id();
    let eos = vocab.eos_id();

    let row_favoring = |token: u32| -> Vec<f64> {
        let mut row = vec![0.02; vocab_size];
        row[token as usize] = 40.0;
        row
    };
    let mut rows = Vec::new();
    for (i, &token) in tokens.iter().enumerate() {
        let mut prefix = context.to_vec();
        prefix.extend_from_slice(&tokens[..i]);
        rows.push((prefix, row_favoring(token)));
    }
    let mut final_prefix = context.to_vec();
    final_prefix.extend_from_slice(tokens);
    rows.push((final_prefix, row_favoring(eos)));
    let scorer = TableScorer::from_weights(&row_favoring(eos), rows).expect("square table");

    // Canonical CTC alignment over the non-timestamp tokens.
    let ctc_tokens: Vec<u32> = tokens
        .iter()
        .copied()
        .filter(|&t| vocab.timestamp_index(t).is_none())
        .collect();
    let mut frames: Vec<u32> = Vec::new();
    let mut previous = None;
    for &token in &ctc_tokens {
        if previous == Some(token) {
            frames.push(blank);
        }
        frames.push(token);
        previous = Some(token);
    }
    frames.push(blank); // trailing blank so empty sequences stay decodable
    let lattice_rows: Vec<Vec<f64>> = frames
        .iter()
        .map(|&t| {
            let mut row = vec![0.01; vocab_size];
            row[t as usize] = 100.0;
            row
        })
        .collect();
    let lattice =
        LogProbLattice::from_probs(&lattice_rows, blank, TIMESTAMP_STEP_SECONDS).expect("rows");
    (lattice, scorer)
}

/// Serializes a chunk script into inline scenario JSON values.
pub fn chunk_to_json(
    lattice: &LogProbLattice,
    scorer: &TableScorer,
) -> (serde_json::Value, serde_json::Value) {
    let mut lattice_buf = Vec::new();
    write_lattice_json(lattice, &mut lattice_buf).expect("in-memory write");
    let mut scorer_buf = Vec::new();
    write_table_scorer(scorer, &mut scorer_buf).expect("in-memory write");
    (
        serde_json::from_slice(&lattice_buf).expect("valid json"),
        serde_json::from_slice(&scorer_buf).expect("valid json"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn audio_carries_markers_at_expected_cursors() {
        let scenario = Scenario {
            sample_rate: 16_000,
            duration_seconds: 60.0,
            language: "en".into(),
            task: "asr".into(),
            vocab: ScenarioVocab {
                pieces: strs(&["a"]),
                languages: strs(&["en"]),
                st_targets: vec![],
            },
            chunks: vec![
                ScenarioChunk {
                    marker: 1,
                    expected_cursor: 0.0,
                    lattice: None,
                    lattice_file: None,
                    scorer: None,
                    scorer_file: None,
                },
                ScenarioChunk {
                    marker: 2,
                    expected_cursor: 28.52,
                    lattice: None,
                    lattice_file: None,
                    scorer: None,
                    scorer_file: None,
                },
            ],
        };
        let audio = scenario.build_audio().unwrap();
        assert_eq!(audio.len(), 960_000);
        assert_eq!(audio[0], 1.0 / MARKER_SCALE);
        assert_eq!(audio[1426 * 320], 2.0 / MARKER_SCALE);
        assert_eq!(audio.iter().filter(|&&x| x != 0.0).count(), 2);
    }

    #[test]
    fn scripted_model_answers_by_marker() {
        let vocab = Vocabulary::build(&strs(&["x"]), &strs(&["en"]), &[]).unwrap();
        let piece = vocab.piece_id("x").unwrap();
        let context = [vocab.sos_id(), vocab.language_id("en").unwrap(), vocab.asr_id()];
        let (lattice, scorer) = script_chunk(&vocab, &context, &[piece]);
        let model = ScriptedModel::new(HashMap::from([(3u32, (lattice, scorer))]));

        let mut chunk = vec![0.0f32; 480_000];
        chunk[0] = 3.0 / MARKER_SCALE;
        assert!(model.process_chunk(&chunk, 16_000).is_ok());
        chunk[0] = 4.0 / MARKER_SCALE;
        let Err(err) = model.process_chunk(&chunk, 16_000) else {
            panic!("marker 4 has no script");
        };
        assert!(err.to_string().contains("marker 4"));
    }

    #[test]
    fn scripted_chunk_drives_all_algorithms_to_the_tokens() {
        use crate::decoder::{attention_greedy, ctc_greedy, joint_beam_search, DecodeOptions};
        let vocab = Vocabulary::build(&strs(&["h", "i"]), &strs(&["en"]), &[]).unwrap();
        let context = [vocab.sos_id(), vocab.language_id("en").unwrap(), vocab.asr_id()];
        let tokens = vec![
            vocab.timestamp_id(0),
            vocab.piece_id("h").unwrap(),
            vocab.piece_id("i").unwrap(),
            vocab.timestamp_id(50),
        ];
        let (lattice, scorer) = script_chunk(&vocab, &context, &tokens);

        let greedy = attention_greedy(&scorer, &context, vocab.eos_id(), 50);
        assert_eq!(greedy.tokens, tokens);

        let ctc: Vec<u32> = ctc_greedy(&lattice);
        let expected_ctc: Vec<u32> = tokens
            .iter()
            .copied()
            .filter(|&t| vocab.timestamp_index(t).is_none())
            .collect();
        assert_eq!(ctc, expected_ctc);

        let mut opts = DecodeOptions::new(vocab.eos_id());
        opts.attention_only = std::collections::BTreeSet::from_iter(vocab.timestamp_ids());
        opts.max_len = 50;
        let joint = joint_beam_search(&scorer, &lattice, &context, &opts).unwrap();
        assert_eq!(joint[0].tokens, tokens);
    }
}
