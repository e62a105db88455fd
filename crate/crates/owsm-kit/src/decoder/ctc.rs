//! CTC decoding and scoring over a [`LogProbLattice`].

use super::lattice::LogProbLattice;
use super::logmath::{is_log_zero, log_add, log_mul, LOG_ZERO};
use super::DecoderError;

/// Best-path decoding: per-frame argmax (ties to the lowest id), collapse
/// consecutive repeats, drop blanks.
pub fn ctc_greedy(lattice: &LogProbLattice) -> Vec<u32> {
    let blank = lattice.blank_id();
    let mut out = Vec::new();
    let mut previous = blank;
    for t in 0..lattice.num_frames() {
        let row = lattice.row(t);
        let mut best = 0u32;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best as usize] {
                best = k as u32;
            }
        }
        if best != blank && best != previous {
            out.push(best);
        }
        previous = best;
    }
    out
}

fn check_labels(lattice: &LogProbLattice, labels: &[u32]) -> Result<(), DecoderError> {
    for &label in labels {
        if label == lattice.blank_id() {
            return Err(DecoderError::BlankInLabels);
        }
        if label as usize >= lattice.vocab_size() {
            return Err(DecoderError::LabelOutOfRange {
                label,
                vocab_size: lattice.vocab_size(),
            });
        }
    }
    Ok(())
}

/// Log probability that the lattice emits exactly `labels`: the forward
/// algorithm over the blank-augmented state graph, summing every alignment
/// that collapses to `labels`. Infeasible label lengths yield [`LOG_ZERO`]
/// rather than an error. Computed in log space, so it does not underflow
/// for lattices up to ~10⁴ frames.
pub fn ctc_forward_logprob(
    lattice: &LogProbLattice,
    labels: &[u32],
) -> Result<f64, DecoderError> {
    check_labels(lattice, labels)?;
    let t_max = lattice.num_frames();
    if t_max == 0 {
        return Err(DecoderError::EmptyLattice);
    }
    let blank = lattice.blank_id();

    // Extended state s: even = blank slot s/2, odd = label (s-1)/2.
    let n_states = 2 * labels.len() + 1;
    let state_token = |s: usize| -> u32 {
        if s.is_multiple_of(2) {
            blank
        } else {
            labels[(s - 1) / 2]
        }
    };

    let mut alpha = vec![LOG_ZERO; n_states];
    alpha[0] = lattice.log_prob(0, blank);
    if n_states > 1 {
        alpha[1] = lattice.log_prob(0, state_token(1));
    }

    let mut next = vec![LOG_ZERO; n_states];
    for t in 1..t_max {
        for (s, slot) in next.iter_mut().enumerate() {
            let token = state_token(s);
            let mut sum = alpha[s];
            if s >= 1 {
                sum = log_add(sum, alpha[s - 1]);
            }
            // Skip over a blank slot, allowed only between distinct labels.
            if s >= 2 && token != blank && token != state_token(s - 2) {
                sum = log_add(sum, alpha[s - 2]);
            }
            *slot = log_mul(sum, lattice.log_prob(t, token));
        }
        std::mem::swap(&mut alpha, &mut next);
    }

    let mut total = alpha[n_states - 1];
    if n_states > 1 {
        total = log_add(total, alpha[n_states - 2]);
    }
    Ok(total)
}

/// Incremental CTC prefix scoring for label-synchronous beam search.
///
/// For a prefix g the state keeps, per frame t, the log probability that
/// the first t+1 frames collapse to exactly g, split by whether the path
/// ends in the last label (`r_nb`) or in blank (`r_b`), plus the cumulative
/// prefix probability ψ(g) = P(output starts with g). Appending a label c
/// advances the state in O(T):
///
///   r_nb'[t] = (r_nb'[t-1] + φ[t-1]) · x_t(c)
///   r_b'[t]  = (r_b'[t-1] + r_nb'[t-1]) · x_t(blank)
///   ψ(g·c)   = Σ_t φ[t-1] · x_t(c)
///
/// where φ[t] = r_b[t] + r_nb[t], dropping the r_nb term when c repeats the
/// last label (a repeat needs a separating blank). The empty prefix starts
/// with r_b as the cumulative all-blank path and φ[-1] = 1.
pub struct CtcPrefixScorer<'a> {
    lattice: &'a LogProbLattice,
}

/// Per-prefix scoring state; cheap to clone relative to the lattice.
#[derive(Debug, Clone)]
pub struct CtcPrefixState {
    r_nb: Vec<f64>,
    r_b: Vec<f64>,
    last_label: Option<u32>,
    prefix_logp: f64,
}

impl CtcPrefixState {
    /// log ψ(g): probability mass of complete outputs that start with g.
    pub fn prefix_log_prob(&self) -> f64 {
        self.prefix_logp
    }

    /// log P(output == g): the full-sequence score used when a hypothesis
    /// ends (matches [`ctc_forward_logprob`] on the same labels).
    pub fn complete_log_prob(&self) -> f64 {
        log_add(*self.r_nb.last().unwrap(), *self.r_b.last().unwrap())
    }
}

impl<'a> CtcPrefixScorer<'a> {
    pub fn new(lattice: &'a LogProbLattice) -> Result<Self, DecoderError> {
        if lattice.num_frames() == 0 {
            return Err(DecoderError::EmptyLattice);
        }
        Ok(CtcPrefixScorer { lattice })
    }

    pub fn lattice(&self) -> &LogProbLattice {
        self.lattice
    }

    /// State of the empty prefix: ψ(∅) = 1 and only all-blank paths.
    pub fn initial_state(&self) -> CtcPrefixState {
        let t_max = self.lattice.num_frames();
        let blank = self.lattice.blank_id();
        let mut r_b = Vec::with_capacity(t_max);
        let mut cum = 0.0;
        for t in 0..t_max {
            cum = log_mul(cum, self.lattice.log_prob(t, blank));
            r_b.push(cum);
        }
        CtcPrefixState {
            r_nb: vec![LOG_ZERO; t_max],
            r_b,
            last_label: None,
            prefix_logp: 0.0,
        }
    }

    /// Advances a prefix state by one non-blank label.
    pub fn advance(
        &self,
        state: &CtcPrefixState,
        label: u32,
    ) -> Result<CtcPrefixState, DecoderError> {
        check_labels(self.lattice, &[label])?;
        let t_max = self.lattice.num_frames();
        let blank = self.lattice.blank_id();
        let repeats = state.last_label == Some(label);

        let mut r_nb = vec![LOG_ZERO; t_max];
        let mut r_b = vec![LOG_ZERO; t_max];
        let mut psi = LOG_ZERO;
        for t in 0..t_max {
            // φ at t-1: paths over the first t frames that may emit the new
            // label at frame t. The virtual frame -1 carries probability 1
            // for the empty prefix only.
            let phi_prev = if t == 0 {
                if state.last_label.is_none() { 0.0 } else { LOG_ZERO }
            } else if repeats {
                state.r_b[t - 1]
            } else {
                log_add(state.r_b[t - 1], state.r_nb[t - 1])
            };
            let x_label = self.lattice.log_prob(t, label);
            let prev_nb = if t == 0 { LOG_ZERO } else { r_nb[t - 1] };
            let prev_b = if t == 0 { LOG_ZERO } else { r_b[t - 1] };
            r_nb[t] = log_mul(log_add(prev_nb, phi_prev), x_label);
            r_b[t] = log_mul(log_add(prev_b, prev_nb), self.lattice.log_prob(t, blank));
            psi = log_add(psi, log_mul(phi_prev, x_label));
        }
        Ok(CtcPrefixState {
            r_nb,
            r_b,
            last_label: Some(label),
            prefix_logp: psi,
        })
    }

    /// Convenience: score a whole prefix from scratch.
    pub fn score_prefix(&self, labels: &[u32]) -> Result<CtcPrefixState, DecoderError> {
        let mut state = self.initial_state();
        for &label in labels {
            state = self.advance(&state, label)?;
        }
        Ok(state)
    }
}

/// True when the score is effectively impossible.
pub fn is_impossible(score: f64) -> bool {
    is_log_zero(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_lattice(frames: &[u32], vocab_size: usize, blank: u32) -> LogProbLattice {
        let rows: Vec<Vec<f64>> = frames
            .iter()
            .map(|&k| {
                (0..vocab_size)
                    .map(|v| if v as u32 == k { 1.0 } else { 1e-12 })
                    .collect()
            })
            .collect();
        LogProbLattice::from_probs(&rows, blank, 0.04).unwrap()
    }

    #[test]
    fn greedy_collapses_repeats_and_blanks() {
        // argmaxes: a a _ b b  -> a b   (blank = 0, a = 1, b = 2)
        let lat = one_hot_lattice(&[1, 1, 0, 2, 2], 3, 0);
        assert_eq!(ctc_greedy(&lat), vec![1, 2]);
    }

    #[test]
    fn greedy_of_all_blanks_is_empty() {
        let lat = one_hot_lattice(&[0, 0, 0], 3, 0);
        assert!(ctc_greedy(&lat).is_empty());
    }

    #[test]
    fn greedy_keeps_blank_separated_repeats() {
        let lat = one_hot_lattice(&[1, 0, 1], 3, 0);
        assert_eq!(ctc_greedy(&lat), vec![1, 1]);
    }

    #[test]
    fn greedy_recovers_canonical_alignment() {
        // labels -> one-hot alignment with separating blanks -> labels again
        let labels = vec![1u32, 2, 2, 3];
        let mut frames = Vec::new();
        let mut prev = None;
        for &l in &labels {
            if prev == Some(l) {
                frames.push(0);
            }
            frames.push(l);
            prev = Some(l);
        }
        let lat = one_hot_lattice(&frames, 4, 0);
        assert_eq!(ctc_greedy(&lat), labels);
    }

    #[test]
    fn forward_single_frame_single_label() {
        let lat = LogProbLattice::from_probs(&[vec![0.4, 0.6]], 0, 0.04).unwrap();
        let lp = ctc_forward_logprob(&lat, &[1]).unwrap();
        assert!((lp.exp() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn forward_two_frames_sums_three_alignments() {
        // Both rows (blank 0.4, a 0.6); alignments aa, a_, _a:
        // 0.36 + 0.24 + 0.24 = 0.84.
        let rows = vec![vec![0.4, 0.6], vec![0.4, 0.6]];
        let lat = LogProbLattice::from_probs(&rows, 0, 0.04).unwrap();
        let lp = ctc_forward_logprob(&lat, &[1]).unwrap();
        assert!((lp.exp() - 0.84).abs() < 1e-12);
    }

    #[test]
    fn forward_of_empty_labels_is_all_blank_path() {
        let rows = vec![vec![0.4, 0.6], vec![0.25, 0.75], vec![0.5, 0.5]];
        let lat = LogProbLattice::from_probs(&rows, 0, 0.04).unwrap();
        let lp = ctc_forward_logprob(&lat, &[]).unwrap();
        assert!((lp.exp() - 0.4 * 0.25 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn forward_is_zero_for_infeasible_labels() {
        let rows = vec![vec![0.4, 0.6]];
        let lat = LogProbLattice::from_probs(&rows, 0, 0.04).unwrap();
        // Two labels cannot fit in one frame.
        let lp = ctc_forward_logprob(&lat, &[1, 1]).unwrap();
        assert!(is_impossible(lp));
    }

    #[test]
    fn forward_rejects_blank_in_labels() {
        let rows = vec![vec![0.5, 0.5]];
        let lat = LogProbLattice::from_probs(&rows, 0, 0.04).unwrap();
        assert!(matches!(
            ctc_forward_logprob(&lat, &[0]),
            Err(DecoderError::BlankInLabels)
        ));
    }

    #[test]
    fn prefix_complete_matches_forward() {
        let rows = vec![
            vec![0.5, 0.2, 0.3],
            vec![0.1, 0.6, 0.3],
            vec![0.3, 0.3, 0.4],
            vec![0.25, 0.5, 0.25],
        ];
        let lat = LogProbLattice::from_probs(&rows, 0, 0.04).unwrap();
        let scorer = CtcPrefixScorer::new(&lat).unwrap();
        for labels in [vec![], vec![1], vec![2, 1], vec![1, 1], vec![1, 2, 1]] {
            let state = scorer.score_prefix(&labels).unwrap();
            let forward = ctc_forward_logprob(&lat, &labels).unwrap();
            let complete = state.complete_log_prob();
            if is_impossible(forward) {
                assert!(is_impossible(complete), "labels {labels:?}");
            } else {
                assert!(
                    (complete - forward).abs() < 1e-10,
                    "labels {labels:?}: {complete} vs {forward}"
                );
            }
        }
    }

    #[test]
    fn empty_prefix_has_unit_mass() {
        let rows = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let lat = LogProbLattice::from_probs(&rows, 0, 0.04).unwrap();
        let scorer = CtcPrefixScorer::new(&lat).unwrap();
        assert_eq!(scorer.initial_state().prefix_log_prob(), 0.0);
    }
}
