//! Attention greedy decoding and joint CTC/attention beam search.

use std::collections::BTreeSet;

use super::ctc::{CtcPrefixScorer, CtcPrefixState};
use super::lattice::LogProbLattice;
use super::scorer::StepScorer;
use super::DecoderError;

/// Decoding algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    CtcGreedy,
    AttentionGreedy,
    Joint,
}

/// Knobs shared by the decoding entry points.
///
/// `ctc_weight` is the λ in `λ·ctc + (1-λ)·attention`; 0 degenerates to
/// attention-only search and 1 to CTC-prefix-only. Tokens listed in
/// `attention_only` (timestamps, typically) are scored by attention alone
/// and are transparent to the CTC prefix state.
#[derive(Debug, Clone)]
pub struct DecodeOptions {
    pub algorithm: Algorithm,
    pub beam_size: usize,
    pub ctc_weight: f64,
    pub max_len: usize,
    pub n_best: usize,
    pub eos_id: u32,
    pub attention_only: BTreeSet<u32>,
}

impl DecodeOptions {
    pub fn new(eos_id: u32) -> Self {
        DecodeOptions {
            algorithm: Algorithm::Joint,
            beam_size: 10,
            ctc_weight: 0.3,
            max_len: 220,
            n_best: 1,
            eos_id,
            attention_only: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DecoderError> {
        if self.beam_size < 1 {
            return Err(DecoderError::BeamSizeZero);
        }
        if !(0.0..=1.0).contains(&self.ctc_weight) {
            return Err(DecoderError::CtcWeightOutOfRange(self.ctc_weight));
        }
        Ok(())
    }
}

/// Output of [`attention_greedy`]: the tokens between the forced context
/// and EOS, flagged when the length cap cut decoding short.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyDecode {
    pub tokens: Vec<u32>,
    pub att_score: f64,
    pub truncated: bool,
}

/// Repeatedly appends the argmax token (ties to the lowest id) until EOS
/// or `max_len` tokens.
pub fn attention_greedy(
    scorer: &dyn StepScorer,
    context: &[u32],
    eos_id: u32,
    max_len: usize,
) -> GreedyDecode {
    let mut prefix = context.to_vec();
    let mut tokens = Vec::new();
    let mut att_score = 0.0;
    for _ in 0..max_len {
        let row = scorer.score(&prefix);
        let best = argmax(&row);
        att_score += row[best as usize];
        if best == eos_id {
            return GreedyDecode {
                tokens,
                att_score,
                truncated: false,
            };
        }
        tokens.push(best);
        prefix.push(best);
    }
    GreedyDecode {
        tokens,
        att_score,
        truncated: true,
    }
}

fn argmax(row: &[f64]) -> u32 {
    let mut best = 0usize;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best as u32
}

/// Beam entry: generated tokens (forced context excluded), the summed
/// attention log probability, the incremental CTC prefix state, and the
/// combined score `λ·ctc + (1-λ)·att`.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub prefix: Vec<u32>,
    pub att_score: f64,
    pub ctc_state: CtcPrefixState,
    pub combined: f64,
}

/// A finished hypothesis with its combined score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub tokens: Vec<u32>,
    pub score: f64,
}

/// Label-synchronous beam search combining CTC prefix scores with
/// attention scores.
///
/// Every live hypothesis is also finalized through EOS at each step; a
/// finalized hypothesis swaps its CTC prefix score for the full-sequence
/// CTC score, which is fair across lengths. At `max_len` only EOS is
/// allowed, so every surviving hypothesis terminates. Results come back
/// sorted by combined score, ties broken toward the lexicographically
/// smaller token sequence, truncated to `n_best`.
pub fn joint_beam_search(
    scorer: &dyn StepScorer,
    lattice: &LogProbLattice,
    context: &[u32],
    opts: &DecodeOptions,
) -> Result<Vec<ScoredSequence>, DecoderError> {
    opts.validate()?;
    if scorer.vocab_size() != lattice.vocab_size() {
        return Err(DecoderError::VocabSizeMismatch {
            lattice: lattice.vocab_size(),
            scorer: scorer.vocab_size(),
        });
    }
    let prefix_scorer = CtcPrefixScorer::new(lattice)?;
    let lambda = opts.ctc_weight;
    let att_weight = 1.0 - lambda;
    let vocab_size = lattice.vocab_size() as u32;
    let blank = lattice.blank_id();

    let mut beam = vec![Hypothesis {
        prefix: Vec::new(),
        att_score: 0.0,
        ctc_state: prefix_scorer.initial_state(),
        combined: 0.0,
    }];
    let mut finished: Vec<ScoredSequence> = Vec::new();

    for step in 0..=opts.max_len {
        let eos_only = step == opts.max_len;
        let mut candidates: Vec<Hypothesis> = Vec::new();
        for hyp in &beam {
            let mut full_prefix = Vec::with_capacity(context.len() + hyp.prefix.len());
            full_prefix.extend_from_slice(context);
            full_prefix.extend_from_slice(&hyp.prefix);
            let row = scorer.score(&full_prefix);
            if row.len() != lattice.vocab_size() {
                return Err(DecoderError::ScorerRowLength {
                    expected: lattice.vocab_size(),
                    found: row.len(),
                });
            }

            // Ending here replaces the prefix score with the full-sequence
            // CTC score.
            let eos_att = hyp.att_score + row[opts.eos_id as usize];
            let eos_combined =
                lambda * hyp.ctc_state.complete_log_prob() + att_weight * eos_att;
            finished.push(ScoredSequence {
                tokens: hyp.prefix.clone(),
                score: eos_combined,
            });
            if eos_only {
                continue;
            }

            for token in 0..vocab_size {
                if token == blank || token == opts.eos_id {
                    continue;
                }
                let att_score = hyp.att_score + row[token as usize];
                let (ctc_state, ctc_score) = if opts.attention_only.contains(&token) {
                    (hyp.ctc_state.clone(), hyp.ctc_state.prefix_log_prob())
                } else {
                    let state = prefix_scorer.advance(&hyp.ctc_state, token)?;
                    let score = state.prefix_log_prob();
                    (state, score)
                };
                let mut prefix = hyp.prefix.clone();
                prefix.push(token);
                candidates.push(Hypothesis {
                    prefix,
                    att_score,
                    ctc_state,
                    combined: lambda * ctc_score + att_weight * att_score,
                });
            }
        }
        if eos_only || candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            b.combined
                .total_cmp(&a.combined)
                .then_with(|| a.prefix.cmp(&b.prefix))
        });
        candidates.truncate(opts.beam_size);
        beam = candidates;
    }

    finished.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    finished.truncate(opts.n_best.max(1));
    Ok(finished)
}
