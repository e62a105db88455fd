//! Acoustic front end: log-Mel features, normalization, augmentation, and
//! the frame-stacking stand-in for the encoder's convolutional downsampling.
//!
//! Conventions are fixed so results are bit-reproducible: 16 kHz input,
//! 25 ms Hann window, 10 ms hop, power spectrum, 80 mel triangles with unit
//! peak spanning 0 Hz to Nyquist on the 2595·log10(1 + f/700) scale, and a
//! natural-log floor of 1e-10.

mod augment;
mod cmvn;
mod io;
mod mel;

pub use augment::{reduce_time_resolution, spec_augment, SpecAugmentConfig};
pub use cmvn::{accumulate_cmvn, apply_cmvn, CmvnStats};
pub use io::{
    read_feature_matrix, read_feature_matrix_binary, read_feature_matrix_json,
    write_feature_matrix_binary, write_feature_matrix_json, FEATURE_MAGIC,
};
pub use mel::{log_mel, mel_filter_centers_hz, LOG_FLOOR};

use thiserror::Error;

/// Mel bands per frame before any time reduction.
pub const NUM_MEL_BINS: usize = 80;
/// Analysis window: 25 ms at 16 kHz.
pub const WINDOW_SAMPLES: usize = 400;
/// Hop: 10 ms at 16 kHz.
pub const HOP_SAMPLES: usize = 160;
/// Default input sample rate.
pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("audio has {0} samples, shorter than one {WINDOW_SAMPLES}-sample window")]
    AudioTooShort(usize),
    #[error("time-reduction factor must be at least 1")]
    BadReductionFactor,
    #[error("CMVN stats are empty")]
    EmptyCmvn,
    #[error("dimension mismatch: features have {features}, stats have {stats}")]
    DimensionMismatch { features: usize, stats: usize },
    #[error("feature file: {0}")]
    File(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A T × dim matrix of real-valued features, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    dim: usize,
    frame_shift: f64,
    sample_rate: u32,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, dim: usize, frame_shift: f64, sample_rate: u32) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "data must be T*dim values");
        FeatureMatrix {
            data,
            dim,
            frame_shift,
            sample_rate,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Seconds between consecutive frames (0.010 before reduction).
    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Frame count for a given number of samples: `1 + (n - window) / hop`.
pub fn num_frames_for(n_samples: usize) -> Option<usize> {
    (n_samples >= WINDOW_SAMPLES).then(|| 1 + (n_samples - WINDOW_SAMPLES) / HOP_SAMPLES)
}
