//! Token vocabulary: special tokens plus BPE pieces with a bijective id map.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

use super::special::{
    is_well_formed_code, SpecialToken, MAX_TIMESTAMP_INDEX, NUM_TIMESTAMP_TOKENS,
};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("pieces list is empty")]
    EmptyPieces,
    #[error("duplicate piece {0:?}")]
    DuplicatePiece(String),
    #[error("duplicate language code {0:?}")]
    DuplicateLanguage(String),
    #[error("duplicate translation target {0:?}")]
    DuplicateStTarget(String),
    #[error("malformed language code {0:?} (expected 2-3 lowercase ASCII letters)")]
    MalformedCode(String),
    #[error("piece {0:?} collides with the special-token syntax")]
    PieceCollidesWithSpecial(String),
    #[error("piece {0:?} cannot be stored one-per-line (empty or contains a newline)")]
    UnrepresentablePiece(String),
    #[error("vocabulary file: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What a token id stands for.
#[derive(Debug, Clone, PartialEq)]
pub enum Token<'a> {
    Special(&'a SpecialToken),
    Piece(&'a str),
}

/// Immutable token inventory with a bijective token ↔ id mapping.
///
/// Id layout is deterministic: special tokens first (SOP, SOS, EOS,
/// languages, ASR, ST targets, 1501 timestamps), then BPE pieces, then the
/// CTC blank as the final id. The blank is never produced by text
/// serialization.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    specials: Vec<SpecialToken>,
    pieces: Vec<String>,
    languages: Vec<String>,
    st_targets: Vec<String>,
    piece_ids: HashMap<String, u32>,
    language_ids: HashMap<String, u32>,
    st_ids: HashMap<String, u32>,
    timestamp_base: u32,
    asr_id: u32,
    max_piece_len: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from BPE pieces, speech languages and translation
    /// targets. Rejects duplicates, malformed codes, and pieces that would be
    /// indistinguishable from a special token in the vocabulary file.
    pub fn build(
        pieces: &[String],
        languages: &[String],
        st_targets: &[String],
    ) -> Result<Self, VocabError> {
        if pieces.is_empty() {
            return Err(VocabError::EmptyPieces);
        }
        for code in languages.iter().chain(st_targets) {
            if !is_well_formed_code(code) {
                return Err(VocabError::MalformedCode(code.clone()));
            }
        }

        let mut specials = vec![SpecialToken::Sop, SpecialToken::Sos, SpecialToken::Eos];
        let mut language_ids = HashMap::new();
        for code in languages {
            if language_ids
                .insert(code.clone(), specials.len() as u32)
                .is_some()
            {
                return Err(VocabError::DuplicateLanguage(code.clone()));
            }
            specials.push(SpecialToken::Language(code.clone()));
        }
        let asr_id = specials.len() as u32;
        specials.push(SpecialToken::TaskAsr);
        let mut st_ids = HashMap::new();
        for code in st_targets {
            if st_ids.insert(code.clone(), specials.len() as u32).is_some() {
                return Err(VocabError::DuplicateStTarget(code.clone()));
            }
            specials.push(SpecialToken::TaskSt(code.clone()));
        }
        let timestamp_base = specials.len() as u32;
        for index in 0..NUM_TIMESTAMP_TOKENS {
            specials.push(SpecialToken::Timestamp(index));
        }

        let piece_base = specials.len() as u32;
        let mut piece_ids = HashMap::new();
        let mut max_piece_len = 0;
        for (i, piece) in pieces.iter().enumerate() {
            if piece.is_empty() || piece.contains(['\n', '\r']) {
                return Err(VocabError::UnrepresentablePiece(piece.clone()));
            }
            if looks_like_special(piece) {
                return Err(VocabError::PieceCollidesWithSpecial(piece.clone()));
            }
            if piece_ids
                .insert(piece.clone(), piece_base + i as u32)
                .is_some()
            {
                return Err(VocabError::DuplicatePiece(piece.clone()));
            }
            max_piece_len = max_piece_len.max(piece.len());
        }

        Ok(Vocabulary {
            specials,
            pieces: pieces.to_vec(),
            languages: languages.to_vec(),
            st_targets: st_targets.to_vec(),
            piece_ids,
            language_ids,
            st_ids,
            timestamp_base,
            asr_id,
            max_piece_len,
        })
    }

    /// Total number of ids, including the blank.
    pub fn len(&self) -> usize {
        self.specials.len() + self.pieces.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one piece
    }

    pub fn sop_id(&self) -> u32 {
        0
    }

    pub fn sos_id(&self) -> u32 {
        1
    }

    pub fn eos_id(&self) -> u32 {
        2
    }

    pub fn asr_id(&self) -> u32 {
        self.asr_id
    }

    /// The CTC blank: always the final id.
    pub fn blank_id(&self) -> u32 {
        (self.len() - 1) as u32
    }

    pub fn language_id(&self, code: &str) -> Option<u32> {
        self.language_ids.get(code).copied()
    }

    pub fn st_id(&self, target: &str) -> Option<u32> {
        self.st_ids.get(target).copied()
    }

    pub fn timestamp_id(&self, index: u16) -> u32 {
        assert!(index <= MAX_TIMESTAMP_INDEX, "timestamp index out of range");
        self.timestamp_base + u32::from(index)
    }

    /// Timestamp index carried by `id`, if it is a timestamp token.
    pub fn timestamp_index(&self, id: u32) -> Option<u16> {
        let end = self.timestamp_base + u32::from(NUM_TIMESTAMP_TOKENS);
        (self.timestamp_base..end)
            .contains(&id)
            .then(|| (id - self.timestamp_base) as u16)
    }

    /// Id range of the timestamp tokens (half-open).
    pub fn timestamp_ids(&self) -> std::ops::Range<u32> {
        self.timestamp_base..self.timestamp_base + u32::from(NUM_TIMESTAMP_TOKENS)
    }

    pub fn piece_id(&self, piece: &str) -> Option<u32> {
        self.piece_ids.get(piece).copied()
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn st_targets(&self) -> &[String] {
        &self.st_targets
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    /// Length in bytes of the longest piece.
    pub fn max_piece_len(&self) -> usize {
        self.max_piece_len
    }

    /// Resolves an id. Returns `None` for out-of-range ids; the blank maps to
    /// `Token::Special(Blank)`.
    pub fn token(&self, id: u32) -> Option<Token<'_>> {
        let id = id as usize;
        if id < self.specials.len() {
            Some(Token::Special(&self.specials[id]))
        } else if id < self.specials.len() + self.pieces.len() {
            Some(Token::Piece(&self.pieces[id - self.specials.len()]))
        } else if id == self.len() - 1 {
            Some(Token::Special(&SpecialToken::Blank))
        } else {
            None
        }
    }

    /// Rendering of an id as it appears in the vocabulary file.
    pub fn render(&self, id: u32) -> Option<String> {
        self.token(id).map(|t| match t {
            Token::Special(s) => s.render(),
            Token::Piece(p) => p.to_string(),
        })
    }

    /// Writes the vocabulary as UTF-8 text, one token per line in id order.
    pub fn to_writer<W: Write>(&self, mut w: W) -> io::Result<()> {
        for id in 0..self.len() as u32 {
            writeln!(w, "{}", self.render(id).expect("id in range"))?;
        }
        Ok(())
    }

    pub fn write_to_file<P: AsRef<Path>>(&self, path: P) -> io::Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.to_writer(&mut file)?;
        file.flush()
    }

    /// Reads a vocabulary file produced by [`Vocabulary::to_writer`].
    pub fn from_reader<R: BufRead>(r: R) -> Result<Self, VocabError> {
        let mut languages = Vec::new();
        let mut st_targets = Vec::new();
        let mut pieces = Vec::new();
        let mut lines = r.lines().enumerate();

        let mut expect = |want: &str| -> Result<(), VocabError> {
            match lines.next() {
                Some((n, Ok(line))) if line == want => {
                    let _ = n;
                    Ok(())
                }
                Some((n, Ok(line))) => Err(VocabError::File(format!(
                    "line {}: expected {want:?}, found {line:?}",
                    n + 1
                ))),
                Some((_, Err(e))) => Err(VocabError::Io(e)),
                None => Err(VocabError::File(format!("unexpected end, expected {want:?}"))),
            }
        };
        expect("<sop>")?;
        expect("<sos>")?;
        expect("<eos>")?;

        // Languages run until "<asr>".
        let mut saw_asr = false;
        for (n, line) in lines.by_ref() {
            let line = line?;
            if line == "<asr>" {
                saw_asr = true;
                break;
            }
            match parse_angle_code(&line) {
                Some(code) => languages.push(code.to_string()),
                None => {
                    return Err(VocabError::File(format!(
                        "line {}: expected a language token or <asr>, found {line:?}",
                        n + 1
                    )))
                }
            }
        }
        if !saw_asr {
            return Err(VocabError::File("missing <asr> token".into()));
        }

        // ST targets run until the first timestamp "<0.00>".
        let mut saw_ts = false;
        for (n, line) in lines.by_ref() {
            let line = line?;
            if line == "<0.00>" {
                saw_ts = true;
                break;
            }
            match line.strip_prefix("<st_").and_then(|s| s.strip_suffix('>')) {
                Some(code) if is_well_formed_code(code) => st_targets.push(code.to_string()),
                _ => {
                    return Err(VocabError::File(format!(
                        "line {}: expected an <st_*> token or <0.00>, found {line:?}",
                        n + 1
                    )))
                }
            }
        }
        if !saw_ts {
            return Err(VocabError::File("missing timestamp tokens".into()));
        }
        for index in 1..NUM_TIMESTAMP_TOKENS {
            let want = SpecialToken::Timestamp(index).render();
            match lines.next() {
                Some((_, Ok(line))) if line == want => {}
                Some((n, Ok(line))) => {
                    return Err(VocabError::File(format!(
                        "line {}: expected {want:?}, found {line:?}",
                        n + 1
                    )))
                }
                Some((_, Err(e))) => return Err(VocabError::Io(e)),
                None => return Err(VocabError::File("truncated timestamp block".into())),
            }
        }

        // Pieces run until the final "<blank>".
        let mut saw_blank = false;
        for (n, line) in lines.by_ref() {
            let line = line?;
            if line == "<blank>" {
                saw_blank = true;
                if let Some((n, _)) = lines.next() {
                    return Err(VocabError::File(format!(
                        "line {}: content after <blank>",
                        n + 1
                    )));
                }
                break;
            }
            if looks_like_special(&line) {
                return Err(VocabError::File(format!(
                    "line {}: special token {line:?} inside the piece block",
                    n + 1
                )));
            }
            pieces.push(line);
        }
        if !saw_blank {
            return Err(VocabError::File("missing final <blank> token".into()));
        }

        Vocabulary::build(&pieces, &languages, &st_targets)
    }

    pub fn read_from_file<P: AsRef<Path>>(path: P) -> Result<Self, VocabError> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_reader(file)
    }
}

fn parse_angle_code(line: &str) -> Option<&str> {
    let inner = line.strip_prefix('<')?.strip_suffix('>')?;
    is_well_formed_code(inner).then_some(inner)
}

/// True for strings that would parse as a special token in a vocabulary file.
fn looks_like_special(piece: &str) -> bool {
    if matches!(piece, "<sop>" | "<sos>" | "<eos>" | "<asr>" | "<blank>") {
        return true;
    }
    if parse_angle_code(piece).is_some() {
        return true;
    }
    if let Some(code) = piece.strip_prefix("<st_").and_then(|s| s.strip_suffix('>')) {
        if is_well_formed_code(code) {
            return true;
        }
    }
    if let Some(inner) = piece.strip_prefix('<').and_then(|s| s.strip_suffix('>')) {
        if let Some((a, b)) = inner.split_once('.') {
            if !a.is_empty()
                && b.len() == 2
                && a.bytes().all(|c| c.is_ascii_digit())
                && b.bytes().all(|c| c.is_ascii_digit())
            {
                return true;
            }
        }
    }
    false
}
