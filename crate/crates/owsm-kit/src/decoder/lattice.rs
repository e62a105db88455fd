//! Per-frame CTC log-probability matrices.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::logmath::log_sum_exp;
use super::DecoderError;

/// How far a row's logsumexp may drift from 0.
const ROW_NORM_TOLERANCE: f64 = 1e-4;

pub const LATTICE_MAGIC: &[u8; 4] = b"OWLT";

/// T × V matrix of per-frame log probabilities over the vocabulary,
/// the input to every CTC algorithm. Rows are normalized distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbLattice {
    data: Vec<f64>,
    vocab_size: usize,
    blank_id: u32,
    frame_shift: f64,
}

impl LogProbLattice {
    /// Builds from rows of log probabilities, checking normalization and
    /// the blank id.
    pub fn from_log_rows(
        rows: Vec<Vec<f64>>,
        blank_id: u32,
        frame_shift: f64,
    ) -> Result<Self, DecoderError> {
        let Some(vocab_size) = rows.first().map(Vec::len) else {
            return Err(DecoderError::EmptyLattice);
        };
        if vocab_size == 0 || blank_id as usize >= vocab_size {
            return Err(DecoderError::BadBlankId {
                blank_id,
                vocab_size,
            });
        }
        let mut data = Vec::with_capacity(rows.len() * vocab_size);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != vocab_size {
                return Err(DecoderError::RaggedLattice { frame: t });
            }
            let norm = log_sum_exp(&row);
            if norm.abs() > ROW_NORM_TOLERANCE {
                return Err(DecoderError::UnnormalizedRow { frame: t, norm });
            }
            data.extend(row);
        }
        Ok(LogProbLattice {
            data,
            vocab_size,
            blank_id,
            frame_shift,
        })
    }

    /// Builds from rows of non-negative weights, normalizing each row to a
    /// distribution before taking logs. Handy for hand-written fixtures.
    pub fn from_probs(
        rows: &[Vec<f64>],
        blank_id: u32,
        frame_shift: f64,
    ) -> Result<Self, DecoderError> {
        let log_rows = rows
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                row.iter().map(|p| (p / total).ln()).collect()
            })
            .collect();
        Self::from_log_rows(log_rows, blank_id, frame_shift)
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.vocab_size
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn blank_id(&self) -> u32 {
        self.blank_id
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.vocab_size..(t + 1) * self.vocab_size]
    }

    pub fn log_prob(&self, t: usize, token: u32) -> f64 {
        self.row(t)[token as usize]
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeFile {
    blank_id: u32,
    frame_shift: f64,
    frames: Vec<Vec<f64>>,
}

pub fn write_lattice_json<W: Write>(lattice: &LogProbLattice, w: W) -> Result<(), DecoderError> {
    let file = LatticeFile {
        blank_id: lattice.blank_id(),
        frame_shift: lattice.frame_shift(),
        frames: (0..lattice.num_frames()).map(|t| lattice.row(t).to_vec()).collect(),
    };
    serde_json::to_writer(w, &file).map_err(|e| DecoderError::File(e.to_string()))
}

pub fn read_lattice_json<R: Read>(r: R) -> Result<LogProbLattice, DecoderError> {
    let file: LatticeFile =
        serde_json::from_reader(r).map_err(|e| DecoderError::File(e.to_string()))?;
    LogProbLattice::from_log_rows(file.frames, file.blank_id, file.frame_shift)
}

/// Binary form: magic `OWLT`, u32 blank id, u32 frames, u32 vocab size,
/// f64 frame shift, then T*V f32 log probs row-major, little-endian.
pub fn write_lattice_binary<W: Write>(
    lattice: &LogProbLattice,
    mut w: W,
) -> Result<(), DecoderError> {
    w.write_all(LATTICE_MAGIC)?;
    w.write_all(&lattice.blank_id().to_le_bytes())?;
    w.write_all(&(lattice.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(lattice.vocab_size() as u32).to_le_bytes())?;
    w.write_all(&lattice.frame_shift().to_le_bytes())?;
    for &v in &lattice.data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_lattice_binary<R: Read>(mut r: R) -> Result<LogProbLattice, DecoderError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != LATTICE_MAGIC {
        return Err(DecoderError::File(format!(
            "bad magic {:?}, expected OWLT",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut R| -> Result<u32, DecoderError> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let blank_id = read_u32(&mut r)?;
    let t = read_u32(&mut r)? as usize;
    let v = read_u32(&mut r)? as usize;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let frame_shift = f64::from_le_bytes(f64buf);
    let mut rows = Vec::with_capacity(t);
    let mut buf = [0u8; 4];
    for _ in 0..t {
        let mut row = Vec::with_capacity(v);
        for _ in 0..v {
            r.read_exact(&mut buf)?;
            row.push(f64::from(f32::from_le_bytes(buf)));
        }
        rows.push(row);
    }
    LogProbLattice::from_log_rows(rows, blank_id, frame_shift)
}

/// Reads either representation, picking by extension (`.owlt` = binary).
pub fn read_lattice<P: AsRef<Path>>(path: P) -> Result<LogProbLattice, DecoderError> {
    let path = path.as_ref();
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    if path.extension().is_some_and(|e| e == "owlt") {
        read_lattice_binary(file)
    } else {
        read_lattice_json(file)
    }
}
