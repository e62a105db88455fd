//! Raw PCM WAV support, deliberately minimal: mono, 16-bit, uncompressed.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("unsupported WAV: {0} (only 16-bit mono PCM is handled)")]
    Unsupported(String),
    #[error("malformed WAV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Decoded mono audio with samples scaled to [-1, 1].
pub struct WavAudio {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

pub fn read_wav<R: Read>(mut r: R) -> Result<WavAudio, WavError> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    if &header[0..4] != b"RIFF" || &header[8..12] != b"WAVE" {
        return Err(WavError::NotWave);
    }

    let mut sample_rate = None;
    let mut data: Option<Vec<u8>> = None;
    let mut chunk_head = [0u8; 8];
    loop {
        match r.read_exact(&mut chunk_head) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let size = u32::from_le_bytes(chunk_head[4..8].try_into().unwrap()) as usize;
        let mut body = vec![0u8; size + size % 2]; // chunks are word-aligned
        r.read_exact(&mut body)?;
        body.truncate(size);
        match &chunk_head[0..4] {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::Malformed("fmt chunk too small".into()));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format != 1 {
                    return Err(WavError::Unsupported(format!("format tag {format}")));
                }
                if channels != 1 {
                    return Err(WavError::Unsupported(format!("{channels} channels")));
                }
                if bits != 16 {
                    return Err(WavError::Unsupported(format!("{bits}-bit samples")));
                }
                sample_rate = Some(rate);
            }
            b"data" => data = Some(body),
            _ => {} // skip other chunks
        }
    }

    let sample_rate = sample_rate.ok_or_else(|| WavError::Malformed("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| WavError::Malformed("missing data chunk".into()))?;
    let samples = data
        .chunks_exact(2)
        .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
        .collect();
    Ok(WavAudio {
        sample_rate,
        samples,
    })
}

pub fn read_wav_file<P: AsRef<Path>>(path: P) -> Result<WavAudio, WavError> {
    read_wav(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes mono 16-bit PCM; samples are clamped to [-1, 1].
pub fn write_wav<W: Write>(mut w: W, sample_rate: u32, samples: &[f32]) -> Result<(), WavError> {
    let data_len = (samples.len() * 2) as u32;
    w.write_all(b"RIFF")?;
    w.write_all(&(36 + data_len).to_le_bytes())?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_all(&16u32.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?; // PCM
    w.write_all(&1u16.to_le_bytes())?; // mono
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(sample_rate * 2).to_le_bytes())?; // byte rate
    w.write_all(&2u16.to_le_bytes())?; // block align
    w.write_all(&16u16.to_le_bytes())?;
    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_wav_file<P: AsRef<Path>>(
    path: P,
    sample_rate: u32,
    samples: &[f32],
) -> Result<(), WavError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_wav(&mut file, sample_rate, samples)?;
    file.flush()?;
    Ok(())
}
