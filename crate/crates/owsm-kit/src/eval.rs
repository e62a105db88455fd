//! Scoring: text normalization, WER/CER, corpus BLEU, and LID accuracy.
//!
//! The normalizers are reimplementations of documented rule sets, not
//! vendored copies, and make no bit-compatibility claim; the English word
//! mapping ships as editable data.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("reference and hypothesis lists differ in length ({refs} vs {hyps})")]
    LengthMismatch { refs: usize, hyps: usize },
    #[error("no utterance pairs to score")]
    EmptyCorpus,
    #[error("normalizer table: {0}")]
    BadTable(String),
}

/// Which normalizer to run before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizerMode {
    Basic,
    English,
}

/// Word mapping applied on top of the basic rules in English mode.
#[derive(Debug, Clone)]
pub struct EnglishTable {
    mapping: HashMap<String, String>,
}

impl EnglishTable {
    /// The table bundled with the crate: common contractions and small
    /// number words.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/english.json")).expect("bundled table is valid")
    }

    /// Loads a JSON object of `{"word": "replacement"}` pairs.
    pub fn from_json(json: &str) -> Result<Self, EvalError> {
        let mapping: HashMap<String, String> =
            serde_json::from_str(json).map_err(|e| EvalError::BadTable(e.to_string()))?;
        Ok(EnglishTable { mapping })
    }
}

/// Basic: lowercase, curly apostrophes straightened, punctuation replaced
/// by spaces except intra-word apostrophes, whitespace collapsed. English:
/// basic plus a word-for-word mapping pass.
pub fn normalize_text(text: &str, mode: NormalizerMode) -> String {
    match mode {
        NormalizerMode::Basic => normalize_basic(text),
        NormalizerMode::English => normalize_english(text, &EnglishTable::bundled()),
    }
}

/// English normalization with a caller-provided mapping table.
pub fn normalize_english(text: &str, table: &EnglishTable) -> String {
    let basic = normalize_basic(text);
    let mapped: Vec<&str> = basic
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(|w| table.mapping.get(w).map_or(w, String::as_str))
        .collect();
    // Mapped values may be multi-word; re-run the basic pass so the output
    // is a fixed point.
    normalize_basic(&mapped.join(" "))
}

fn normalize_basic(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &ch) in chars.iter().enumerate() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() {
            out.extend(ch.to_lowercase());
        } else if ch == '\'' {
            let prev_ok = i > 0 && chars[i - 1].is_alphanumeric();
            let next_ok = chars
                .get(i + 1)
                .map(|c| c.is_alphanumeric())
                .unwrap_or(false);
            if prev_ok && next_ok {
                out.push('\'');
            } else {
                out.push(' ');
            }
        } else {
            out.push(' ');
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Counts from a minimal edit-distance alignment. `S + D + H = ref_len`
/// always holds; the rate is `(S + D + I) / ref_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EditAlignment {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub hits: usize,
    pub ref_len: usize,
}

impl EditAlignment {
    pub fn rate(&self) -> f64 {
        (self.substitutions + self.deletions + self.insertions) as f64 / self.ref_len as f64
    }
}

/// Minimal edit-distance alignment between two token sequences.
fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditAlignment {
    let n = reference.len();
    let m = hypothesis.len();
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in cost[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = cost[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            cost[i][j] = sub.min(cost[i - 1][j] + 1).min(cost[i][j - 1] + 1);
        }
    }

    // Backtrack, preferring matches, then substitutions, deletions, insertions.
    let mut alignment = EditAlignment {
        substitutions: 0,
        insertions: 0,
        deletions: 0,
        hits: 0,
        ref_len: n,
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let matched = reference[i - 1] == hypothesis[j - 1];
            let diag = cost[i - 1][j - 1] + usize::from(!matched);
            if cost[i][j] == diag {
                if matched {
                    alignment.hits += 1;
                } else {
                    alignment.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[i][j] == cost[i - 1][j] + 1 {
            alignment.deletions += 1;
            i -= 1;
        } else {
            alignment.insertions += 1;
            j -= 1;
        }
    }
    alignment
}

/// Word error rate over whitespace-tokenized text. The reference must
/// contain at least one word.
pub fn word_error_rate(reference: &str, hypothesis: &str) -> Result<(f64, EditAlignment), EvalError> {
    let ref_tokens: Vec<&str> = reference.split_whitespace().collect();
    if ref_tokens.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let hyp_tokens: Vec<&str> = hypothesis.split_whitespace().collect();
    let alignment = align(&ref_tokens, &hyp_tokens);
    Ok((alignment.rate(), alignment))
}

/// Character error rate over unicode scalars, spaces excluded.
pub fn char_error_rate(reference: &str, hypothesis: &str) -> Result<(f64, EditAlignment), EvalError> {
    let ref_chars: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if ref_chars.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let hyp_chars: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
    let alignment = align(&ref_chars, &hyp_chars);
    Ok((alignment.rate(), alignment))
}

/// Corpus-level BLEU in [0, 100]: geometric mean of clipped n-gram
/// precisions up to `max_n` with the brevity penalty. Tokenization is the
/// basic normalizer followed by a whitespace split. No smoothing — a zero
/// precision gives 0.
pub fn corpus_bleu(refs: &[String], hyps: &[String], max_n: usize) -> Result<f64, EvalError> {
    if refs.len() != hyps.len() {
        return Err(EvalError::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    if refs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }

    let tokenize = |s: &String| -> Vec<String> {
        normalize_basic(s).split_whitespace().map(String::from).collect()
    };

    let mut ref_len = 0usize;
    let mut hyp_len = 0usize;
    let mut clipped = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];

    for (r, h) in refs.iter().zip(hyps) {
        let r = tokenize(r);
        let h = tokenize(h);
        ref_len += r.len();
        hyp_len += h.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(&r, n);
            let hyp_counts = ngram_counts(&h, n);
            for (gram, count) in &hyp_counts {
                totals[n - 1] += count;
                clipped[n - 1] += count.min(ref_counts.get(gram).unwrap_or(&0));
            }
        }
    }

    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_precision_sum = 0.0;
    for n in 0..max_n {
        if clipped[n] == 0 || totals[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (clipped[n] as f64 / totals[n] as f64).ln();
    }
    let brevity_penalty = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity_penalty * (log_precision_sum / max_n as f64).exp())
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Fraction of exactly matching language codes.
pub fn lid_accuracy(refs: &[String], predicted: &[String]) -> Result<f64, EvalError> {
    if refs.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            refs: refs.len(),
            hyps: predicted.len(),
        });
    }
    if refs.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let matches = refs.iter().zip(predicted).filter(|(r, p)| r == p).count();
    Ok(matches as f64 / refs.len() as f64)
}
