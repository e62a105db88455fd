//! Feature matrix serialization: JSON and the compact "OWFM" binary form.
//!
//! Binary layout, little-endian: magic `OWFM`, u32 frame count, u32 dim,
//! f64 frame shift, u32 sample rate, then T*dim f32 values row-major.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

pub const FEATURE_MAGIC: &[u8; 4] = b"OWFM";

#[derive(Serialize, Deserialize)]
struct FeatureFile {
    frame_shift: f64,
    sample_rate: u32,
    frames: Vec<Vec<f64>>,
}

pub fn write_feature_matrix_json<W: Write>(
    features: &FeatureMatrix,
    w: W,
) -> Result<(), FeatureError> {
    let file = FeatureFile {
        frame_shift: features.frame_shift(),
        sample_rate: features.sample_rate(),
        frames: features.rows().map(<[f64]>::to_vec).collect(),
    };
    serde_json::to_writer(w, &file).map_err(|e| FeatureError::File(e.to_string()))
}

pub fn read_feature_matrix_json<R: Read>(r: R) -> Result<FeatureMatrix, FeatureError> {
    let file: FeatureFile =
        serde_json::from_reader(r).map_err(|e| FeatureError::File(e.to_string()))?;
    matrix_from_rows(file.frames, file.frame_shift, file.sample_rate)
}

fn matrix_from_rows(
    rows: Vec<Vec<f64>>,
    frame_shift: f64,
    sample_rate: u32,
) -> Result<FeatureMatrix, FeatureError> {
    let Some(dim) = rows.first().map(Vec::len) else {
        return Err(FeatureError::File("no frames".into()));
    };
    if dim == 0 {
        return Err(FeatureError::File("zero-width frames".into()));
    }
    let mut data = Vec::with_capacity(rows.len() * dim);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != dim {
            return Err(FeatureError::File(format!(
                "frame {i} has {} values, expected {dim}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::File(format!("frame {i} has a non-finite value")));
        }
        data.extend(row);
    }
    Ok(FeatureMatrix::new(data, dim, frame_shift, sample_rate))
}

pub fn write_feature_matrix_binary<W: Write>(
    features: &FeatureMatrix,
    mut w: W,
) -> Result<(), FeatureError> {
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(features.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(features.dim() as u32).to_le_bytes())?;
    w.write_all(&features.frame_shift().to_le_bytes())?;
    w.write_all(&features.sample_rate().to_le_bytes())?;
    for &v in features.values() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_feature_matrix_binary<R: Read>(mut r: R) -> Result<FeatureMatrix, FeatureError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FEATURE_MAGIC {
        return Err(FeatureError::File(format!(
            "bad magic {:?}, expected OWFM",
            String::from_utf8_lossy(&magic)
        )));
    }
    let t = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let mut shift = [0u8; 8];
    r.read_exact(&mut shift)?;
    let frame_shift = f64::from_le_bytes(shift);
    let sample_rate = read_u32(&mut r)?;
    if dim == 0 {
        return Err(FeatureError::File("zero-width frames".into()));
    }
    let mut data = Vec::with_capacity(t * dim);
    let mut buf = [0u8; 4];
    for _ in 0..t * dim {
        r.read_exact(&mut buf)?;
        data.push(f64::from(f32::from_le_bytes(buf)));
    }
    Ok(FeatureMatrix::new(data, dim, frame_shift, sample_rate))
}

/// Reads either format, picking by extension (`.owfm` = binary, else JSON).
pub fn read_feature_matrix<P: AsRef<Path>>(path: P) -> Result<FeatureMatrix, FeatureError> {
    let path = path.as_ref();
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    if path.extension().is_some_and(|e| e == "owfm") {
        read_feature_matrix_binary(file)
    } else {
        read_feature_matrix_json(file)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, FeatureError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
