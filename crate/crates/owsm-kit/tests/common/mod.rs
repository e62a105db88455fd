//! Brute-force oracles shared by the integration suites. Everything here
//! enumerates explicitly and stays independent of the implementation paths
//! it checks.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use owsm_kit::decoder::{LogProbLattice, StepScorer, TableScorer};
use owsm_kit::token_format::{timestamp_seconds, MultitaskRecord, Segment, Task};

pub const ORACLE_LOG_ZERO: f64 = -1e30;

/// Collapses one alignment path: merge consecutive repeats, drop blanks.
pub fn collapse_path(path: &[u32], blank: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut previous = None;
    for &symbol in path {
        if Some(symbol) != previous && symbol != blank {
            out.push(symbol);
        }
        previous = Some(symbol);
    }
    out
}

/// Enumerates every V^T alignment path and accumulates the probability of
/// each collapsed label sequence.
pub fn collapse_map(lattice: &LogProbLattice) -> HashMap<Vec<u32>, f64> {
    let t_max = lattice.num_frames();
    let vocab = lattice.vocab_size();
    let mut map: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut path = vec![0u32; t_max];
    loop {
        let mut prob = 1.0;
        for (t, &symbol) in path.iter().enumerate() {
            prob *= lattice.log_prob(t, symbol).exp();
        }
        *map.entry(collapse_path(&path, lattice.blank_id())).or_insert(0.0) += prob;

        // Odometer increment over the V^T space.
        let mut pos = 0;
        loop {
            if pos == t_max {
                return map;
            }
            path[pos] += 1;
            if (path[pos] as usize) < vocab {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

/// Brute-force P(output == labels).
pub fn complete_prob(map: &HashMap<Vec<u32>, f64>, labels: &[u32]) -> f64 {
    map.get(labels).copied().unwrap_or(0.0)
}

/// Brute-force P(output starts with `prefix`).
pub fn prefix_prob(map: &HashMap<Vec<u32>, f64>, prefix: &[u32]) -> f64 {
    map.iter()
        .filter(|(seq, _)| seq.len() >= prefix.len() && seq[..prefix.len()] == *prefix)
        .map(|(_, p)| p)
        .sum()
}

/// All label sequences over the non-blank alphabet up to `max_len`.
pub fn all_label_sequences(vocab_size: usize, blank: u32, max_len: usize) -> Vec<Vec<u32>> {
    let alphabet: Vec<u32> = (0..vocab_size as u32).filter(|&k| k != blank).collect();
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for &symbol in &alphabet {
                let mut extended = seq.clone();
                extended.push(symbol);
                next.push(extended);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Summed attention log probability of emitting `tokens` then EOS after
/// `context`, straight off the scorer.
pub fn attention_path_score(
    scorer: &dyn StepScorer,
    context: &[u32],
    tokens: &[u32],
    eos: u32,
) -> f64 {
    let mut prefix = context.to_vec();
    let mut total = 0.0;
    for &token in tokens {
        total += scorer.score(&prefix)[token as usize];
        prefix.push(token);
    }
    total + scorer.score(&prefix)[eos as usize]
}

/// Exhaustive argmax of λ·CTC + (1-λ)·attention over every label sequence
/// up to `max_len` (EOS-terminated), with the beam's tie-break. The CTC
/// term comes from the enumeration map, not from the decoder.
pub fn exhaustive_joint_argmax(
    scorer: &dyn StepScorer,
    lattice: &LogProbLattice,
    context: &[u32],
    eos: u32,
    lambda: f64,
    max_len: usize,
) -> (Vec<u32>, f64) {
    let map = collapse_map(lattice);
    let mut candidates: Vec<(Vec<u32>, f64)> = Vec::new();
    for seq in all_label_sequences(lattice.vocab_size(), lattice.blank_id(), max_len) {
        if seq.contains(&eos) {
            continue; // EOS terminates; it cannot appear inside a sequence
        }
        let ctc = {
            let p = complete_prob(&map, &seq);
            if p > 0.0 {
                p.ln()
            } else {
                ORACLE_LOG_ZERO
            }
        };
        let att = attention_path_score(scorer, context, &seq, eos);
        candidates.push((seq, lambda * ctc + (1.0 - lambda) * att));
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    candidates.into_iter().next().expect("at least the empty sequence")
}

/// Random normalized lattice with weights bounded away from zero.
pub fn random_lattice(rng: &mut ChaCha8Rng, t_max: usize, vocab_size: usize) -> LogProbLattice {
    let blank = vocab_size as u32 - 1;
    let rows: Vec<Vec<f64>> = (0..t_max)
        .map(|_| (0..vocab_size).map(|_| rng.gen_range(0.05..1.0)).collect())
        .collect();
    LogProbLattice::from_probs(&rows, blank, 0.04).expect("valid random lattice")
}

/// Random table scorer with explicit rows for every prefix up to `depth`.
pub fn random_table_scorer(
    rng: &mut ChaCha8Rng,
    vocab_size: usize,
    blank: u32,
    depth: usize,
) -> TableScorer {
    let mut rows = Vec::new();
    let mut frontier: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..=depth {
        let mut next = Vec::new();
        for prefix in &frontier {
            let weights: Vec<f64> = (0..vocab_size).map(|_| rng.gen_range(0.05..1.0)).collect();
            rows.push((prefix.clone(), weights));
            for symbol in 0..vocab_size as u32 {
                if symbol != blank {
                    let mut extended = prefix.clone();
                    extended.push(symbol);
                    next.push(extended);
                }
            }
        }
        frontier = next;
    }
    let fallback: Vec<f64> = (0..vocab_size).map(|_| rng.gen_range(0.05..1.0)).collect();
    TableScorer::from_weights(&fallback, rows).expect("square table")
}

/// Fuzzed valid records over a small character vocabulary.
pub struct RecordFuzzer {
    pub languages: Vec<String>,
    pub st_targets: Vec<String>,
    pub alphabet: Vec<char>,
}

impl RecordFuzzer {
    pub fn random_record(&self, rng: &mut ChaCha8Rng) -> MultitaskRecord {
        let language = self.languages[rng.gen_range(0..self.languages.len())].clone();
        let task = if rng.gen_bool(0.5) {
            Task::Asr
        } else {
            Task::St {
                target: self.st_targets[rng.gen_range(0..self.st_targets.len())].clone(),
            }
        };
        let prompt = rng.gen_bool(0.3).then(|| self.random_text(rng, 0..12));
        let timestamps_enabled = rng.gen_bool(0.5);
        let segments = if timestamps_enabled {
            let count = rng.gen_range(1..=10);
            // Nondecreasing starts on the 20 ms grid, each end >= its start.
            let mut starts: Vec<u16> =
                (0..count).map(|_| rng.gen_range(0..=1500u16)).collect();
            starts.sort_unstable();
            starts
                .into_iter()
                .map(|start| {
                    let end = rng.gen_range(start..=1500);
                    Segment::timed(
                        timestamp_seconds(start),
                        self.random_text(rng, 0..8),
                        timestamp_seconds(end),
                    )
                })
                .collect()
        } else if rng.gen_bool(0.3) {
            vec![]
        } else {
            vec![Segment::untimed(self.random_text(rng, 1..14))]
        };
        let record = MultitaskRecord {
            prompt,
            language,
            task,
            segments,
            timestamps_enabled,
        };
        record.validate().expect("fuzzer emits valid records");
        record
    }

    fn random_text(&self, rng: &mut ChaCha8Rng, len: std::ops::Range<usize>) -> String {
        let n = rng.gen_range(len);
        (0..n)
            .map(|_| self.alphabet[rng.gen_range(0..self.alphabet.len())])
            .collect()
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
