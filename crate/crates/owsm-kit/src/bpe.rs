//! Minimal byte-pair-encoding trainer and codec.
//!
//! The trainer starts from the character inventory of the corpus and
//! repeatedly merges the most frequent adjacent pair until the requested
//! vocabulary size is reached. Lines are treated as plain character
//! sequences; there is no byte fallback, unicode normalization or word
//! boundary handling.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BpeError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("target vocabulary size {target} is below the character inventory size {chars}")]
    TargetTooSmall { target: usize, chars: usize },
    #[error("character {0:?} is not covered by the model")]
    UnknownChar(char),
    #[error("token id {0} is out of range")]
    UnknownId(u32),
    #[error("model file line {line}: {message}")]
    File { line: usize, message: String },
}

/// Text span that could not be segmented with the available pieces.
#[derive(Debug, Error, PartialEq)]
#[error("no piece segmentation at byte offset {offset} near {snippet:?}")]
pub struct SegmentError {
    pub offset: usize,
    pub snippet: String,
}

/// A trained BPE model: pieces in id order plus the ordered merge list.
///
/// Ids 0..n_chars are the character inventory (sorted); each merge appends
/// one piece, so piece order is merge order.
#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    pieces: Vec<String>,
    merges: Vec<(u32, u32)>,
    n_chars: usize,
    ids: HashMap<String, u32>,
}

impl BpeModel {
    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn piece_id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    /// Encodes text by replaying the learned merges over its characters.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>, BpeError> {
        let mut symbols: Vec<u32> = Vec::with_capacity(text.chars().count());
        for ch in text.chars() {
            let mut buf = [0u8; 4];
            let id = self
                .ids
                .get(ch.encode_utf8(&mut buf) as &str)
                .copied()
                .ok_or(BpeError::UnknownChar(ch))?;
            symbols.push(id);
        }
        for (rank, &(left, right)) in self.merges.iter().enumerate() {
            let merged = (self.n_chars + rank) as u32;
            apply_merge(&mut symbols, left, right, merged);
        }
        Ok(symbols)
    }

    /// Inverse of [`BpeModel::encode`]: concatenates the pieces.
    pub fn decode(&self, ids: &[u32]) -> Result<String, BpeError> {
        let mut out = String::new();
        for &id in ids {
            let piece = self
                .pieces
                .get(id as usize)
                .ok_or(BpeError::UnknownId(id))?;
            out.push_str(piece);
        }
        Ok(out)
    }

    /// Writes the model: pieces one per line in id order. Merged pieces carry
    /// a tab-separated pair of parent ids, so merge order and structure are
    /// recoverable. Tabs and backslashes inside pieces are escaped.
    pub fn to_writer<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (i, piece) in self.pieces.iter().enumerate() {
            if i < self.n_chars {
                writeln!(w, "{}", escape_piece(piece))?;
            } else {
                let (l, r) = self.merges[i - self.n_chars];
                writeln!(w, "{}\t{l} {r}", escape_piece(piece))?;
            }
        }
        Ok(())
    }

    pub fn write_to_file<P: AsRef<Path>>(&self, path: P) -> io::Result<()> {
        let mut file = io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut file)?;
        file.flush()
    }

    pub fn from_reader<R: BufRead>(r: R) -> Result<Self, BpeError> {
        let mut pieces: Vec<String> = Vec::new();
        let mut merges = Vec::new();
        let mut n_chars = 0usize;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| BpeError::File {
                line: i + 1,
                message: e.to_string(),
            })?;
            let bad = |message: String| BpeError::File {
                line: i + 1,
                message,
            };
            let (piece_text, parents) = match line.split_once('\t') {
                Some((p, rest)) => (p, Some(rest)),
                None => (line.as_str(), None),
            };
            let piece = unescape_piece(piece_text)
                .ok_or_else(|| bad("invalid escape sequence".into()))?;
            match parents {
                None => {
                    if !merges.is_empty() {
                        return Err(bad("character entry after a merge entry".into()));
                    }
                    n_chars += 1;
                }
                Some(rest) => {
                    let mut it = rest.split(' ');
                    let (l, r) = match (it.next(), it.next(), it.next()) {
                        (Some(l), Some(r), None) => (l, r),
                        _ => return Err(bad("expected two parent ids".into())),
                    };
                    let l: u32 = l.parse().map_err(|_| bad("bad parent id".into()))?;
                    let r: u32 = r.parse().map_err(|_| bad("bad parent id".into()))?;
                    let join = |id: u32| -> Result<&str, BpeError> {
                        pieces
                            .get(id as usize)
                            .map(String::as_str)
                            .ok_or_else(|| BpeError::File {
                                line: i + 1,
                                message: format!("parent id {id} not yet defined"),
                            })
                    };
                    let expect = format!("{}{}", join(l)?, join(r)?);
                    if expect != piece {
                        return Err(bad(format!(
                            "piece {piece:?} is not the concatenation of its parents"
                        )));
                    }
                    merges.push((l, r));
                }
            }
            pieces.push(piece);
        }
        if pieces.is_empty() {
            return Err(BpeError::File {
                line: 0,
                message: "empty model file".into(),
            });
        }
        let ids = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        Ok(BpeModel {
            pieces,
            merges,
            n_chars,
            ids,
        })
    }

    pub fn read_from_file<P: AsRef<Path>>(path: P) -> Result<Self, BpeError> {
        let file = io::BufReader::new(std::fs::File::open(path).map_err(|e| BpeError::File {
            line: 0,
            message: e.to_string(),
        })?);
        Self::from_reader(file)
    }
}

/// Trains a BPE model on the given lines.
///
/// The initial inventory is the sorted set of characters. Each step merges
/// the most frequent adjacent pair, counting every adjacent position; ties
/// break on the lexicographically smallest (left, right) pair. Training
/// stops early if no adjacent pair remains.
pub fn train_bpe(texts: &[String], target_vocab_size: usize) -> Result<BpeModel, BpeError> {
    if texts.is_empty() || texts.iter().all(|t| t.is_empty()) {
        return Err(BpeError::EmptyCorpus);
    }
    let mut chars: Vec<String> = texts
        .iter()
        .flat_map(|t| t.chars())
        .map(String::from)
        .collect();
    chars.sort();
    chars.dedup();
    if target_vocab_size < chars.len() {
        return Err(BpeError::TargetTooSmall {
            target: target_vocab_size,
            chars: chars.len(),
        });
    }

    let mut pieces = chars.clone();
    let mut ids: HashMap<String, u32> = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i as u32))
        .collect();
    let mut merges: Vec<(u32, u32)> = Vec::new();

    // Working corpus as symbol-id sequences.
    let mut corpus: Vec<Vec<u32>> = texts
        .iter()
        .map(|t| {
            t.chars()
                .map(|ch| ids[&ch.to_string()])
                .collect::<Vec<u32>>()
        })
        .collect();

    while pieces.len() < target_vocab_size {
        let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
        for line in &corpus {
            for pair in line.windows(2) {
                *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
            }
        }
        let Some(best) = counts
            .iter()
            .max_by(|(pa, ca), (pb, cb)| {
                // Highest count wins; ties prefer the lexicographically
                // smallest (left, right) piece pair.
                ca.cmp(cb).then_with(|| {
                    let ka = (&pieces[pa.0 as usize], &pieces[pa.1 as usize]);
                    let kb = (&pieces[pb.0 as usize], &pieces[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            })
            .map(|(&pair, _)| pair)
        else {
            break; // no adjacent pairs left to merge
        };

        let merged_piece = format!("{}{}", pieces[best.0 as usize], pieces[best.1 as usize]);
        let merged_id = pieces.len() as u32;
        // A merged string can already exist via a different split; keep the
        // id map pointing at the first occurrence.
        ids.entry(merged_piece.clone()).or_insert(merged_id);
        pieces.push(merged_piece);
        merges.push(best);
        for line in &mut corpus {
            apply_merge(line, best.0, best.1, merged_id);
        }
    }

    Ok(BpeModel {
        n_chars: chars.len(),
        pieces,
        merges,
        ids,
    })
}

/// Replaces adjacent (left, right) occurrences with `merged`, left to right,
/// non-overlapping.
fn apply_merge(symbols: &mut Vec<u32>, left: u32, right: u32, merged: u32) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
            out.push(merged);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    *symbols = out;
}

fn escape_piece(piece: &str) -> String {
    piece.replace('\\', "\\\\").replace('\t', "\\t")
}

fn unescape_piece(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            _ => return None,
        }
    }
    Some(out)
}

/// Segments `text` into pieces drawn from an arbitrary inventory, preferring
/// the longest piece at each position but backtracking so that a result is
/// found whenever any segmentation exists.
pub fn segment_with_pieces(
    text: &str,
    max_piece_len: usize,
    has_piece: impl Fn(&str) -> bool,
) -> Result<Vec<&str>, SegmentError> {
    let n = text.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // feasible[i]: text[i..] has a segmentation.
    let mut feasible = vec![false; n + 1];
    feasible[n] = true;
    for i in (0..n).rev() {
        if !text.is_char_boundary(i) {
            continue;
        }
        let limit = max_piece_len.min(n - i);
        for len in 1..=limit {
            if text.is_char_boundary(i + len) && feasible[i + len] && has_piece(&text[i..i + len])
            {
                feasible[i] = true;
                break;
            }
        }
    }
    if !feasible[0] {
        // Walk forward to locate the break point for the error message.
        let mut i = 0;
        while i < n {
            let limit = max_piece_len.min(n - i);
            let step = (1..=limit)
                .rev()
                .find(|&len| text.is_char_boundary(i + len) && has_piece(&text[i..i + len]));
            match step {
                Some(len) => i += len,
                None => break,
            }
        }
        let end = (i + 8).min(n);
        let end = (end..=n).find(|&e| text.is_char_boundary(e)).unwrap_or(n);
        return Err(SegmentError {
            offset: i,
            snippet: text[i..end].to_string(),
        });
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let limit = max_piece_len.min(n - i);
        let len = (1..=limit)
            .rev()
            .find(|&len| {
                text.is_char_boundary(i + len) && feasible[i + len] && has_piece(&text[i..i + len])
            })
            .expect("feasible position must extend");
        out.push(&text[i..i + len]);
        i += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_merge_on_aaab_is_aa() {
        // Hand count over ["aaab", "aaab"]: "aa" occurs at two positions per
        // line (4 total), "ab" at one (2 total).
        let model = train_bpe(&lines(&["aaab", "aaab"]), 3).unwrap();
        assert_eq!(model.pieces(), &["a", "b", "aa"]);
        assert_eq!(model.merges(), &[(0, 0)]);
    }

    #[test]
    fn target_equal_to_char_count_learns_no_merges() {
        let model = train_bpe(&lines(&["abc", "cab"]), 3).unwrap();
        assert_eq!(model.pieces(), &["a", "b", "c"]);
        assert!(model.merges().is_empty());
    }

    #[test]
    fn target_below_char_count_is_rejected() {
        let err = train_bpe(&lines(&["abc"]), 2).unwrap_err();
        assert_eq!(err, BpeError::TargetTooSmall { target: 2, chars: 3 });
    }

    #[test]
    fn merge_tie_breaks_on_smallest_pair() {
        // "abba" has pairs (a,b), (b,b), (b,a), once each; ("a","b") is the
        // lexicographically smallest.
        let model = train_bpe(&lines(&["abba"]), 3).unwrap();
        assert_eq!(model.pieces()[2], "ab");
    }

    #[test]
    fn encode_decode_round_trip_on_training_lines() {
        let corpus = lines(&["the cat sat", "the bat", "catcat"]);
        let model = train_bpe(&corpus, 14).unwrap();
        for line in &corpus {
            let ids = model.encode(line).unwrap();
            assert_eq!(model.decode(&ids).unwrap(), *line);
        }
    }

    #[test]
    fn encode_rejects_unseen_char() {
        let model = train_bpe(&lines(&["abc"]), 3).unwrap();
        assert_eq!(model.encode("abd").unwrap_err(), BpeError::UnknownChar('d'));
    }

    #[test]
    fn merge_count_matches_target() {
        let corpus = lines(&["aaabbbccc aaa bbb", "cccaaa"]);
        let chars = 4; // a, b, c, space
        for target in chars..=chars + 5 {
            let model = train_bpe(&corpus, target).unwrap();
            assert_eq!(model.pieces().len(), target);
            assert_eq!(model.merges().len(), target - chars);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let model = train_bpe(&lines(&["tab\tand\\slash", "tab\tand"]), 15).unwrap();
        let mut buf = Vec::new();
        model.to_writer(&mut buf).unwrap();
        let back = BpeModel::from_reader(buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn segmentation_prefers_longest_but_backtracks() {
        let inventory = ["a", "ab", "bc", "c"];
        let has = |s: &str| inventory.contains(&s);
        // Greedy "ab" would strand the final "c"? No: "ab"+"c" works.
        assert_eq!(segment_with_pieces("abc", 2, has).unwrap(), vec!["ab", "c"]);
        // Greedy "ab" strands "cb"? "a"+"bc" requires backtracking past "ab".
        let inventory2 = ["a", "ab", "bc"];
        let has2 = |s: &str| inventory2.contains(&s);
        assert_eq!(segment_with_pieces("abc", 2, has2).unwrap(), vec!["a", "bc"]);
    }

    #[test]
    fn segmentation_reports_offending_span() {
        let err = segment_with_pieces("abzb", 1, |s| s == "a" || s == "b").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.snippet.starts_with('z'));
    }

    #[test]
    fn segmentation_handles_multibyte_chars() {
        let inventory = ["日", "本語"];
        let has = |s: &str| inventory.contains(&s);
        assert_eq!(
            segment_with_pieces("日本語", 6, has).unwrap(),
            vec!["日", "本語"]
        );
    }
}
