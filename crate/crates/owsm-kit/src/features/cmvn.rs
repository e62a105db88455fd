//! Global mean/variance normalization.

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

/// Variances below this are clamped before normalization.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Running per-dimension moment accumulator.
///
/// Internally keeps (count, sum, sum of squares), so partial stats from
/// parallel workers combine associatively with [`CmvnStats::merge`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmvnStats {
    count: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl CmvnStats {
    pub fn new(dim: usize) -> Self {
        CmvnStats {
            count: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn accumulate(&mut self, features: &FeatureMatrix) -> Result<(), FeatureError> {
        if features.dim() != self.dim() {
            return Err(FeatureError::DimensionMismatch {
                features: features.dim(),
                stats: self.dim(),
            });
        }
        for row in features.rows() {
            self.count += 1;
            for ((s, sq), &v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(row) {
                *s += v;
                *sq += v * v;
            }
        }
        Ok(())
    }

    /// Combines two partial accumulations; field-wise, hence associative.
    pub fn merge(&mut self, other: &CmvnStats) -> Result<(), FeatureError> {
        if other.dim() != self.dim() {
            return Err(FeatureError::DimensionMismatch {
                features: other.dim(),
                stats: self.dim(),
            });
        }
        self.count += other.count;
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        for (s, o) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *s += o;
        }
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Population variance per dimension, floored at [`VARIANCE_FLOOR`].
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, sq)| (sq / n - (s / n).powi(2)).max(VARIANCE_FLOOR))
            .collect()
    }

    /// Dimensions whose raw variance fell below the floor; callers should
    /// warn about these before applying the stats.
    pub fn clamped_dims(&self) -> Vec<usize> {
        let n = self.count.max(1) as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .enumerate()
            .filter(|(_, (s, sq))| *sq / n - (*s / n).powi(2) < VARIANCE_FLOOR)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Folds a stream of matrices into one stats object.
pub fn accumulate_cmvn<'a>(
    features: impl IntoIterator<Item = &'a FeatureMatrix>,
    dim: usize,
) -> Result<CmvnStats, FeatureError> {
    let mut stats = CmvnStats::new(dim);
    for f in features {
        stats.accumulate(f)?;
    }
    Ok(stats)
}

/// Normalizes each dimension to zero mean and unit variance under `stats`.
pub fn apply_cmvn(features: &FeatureMatrix, stats: &CmvnStats) -> Result<FeatureMatrix, FeatureError> {
    if stats.count == 0 {
        return Err(FeatureError::EmptyCmvn);
    }
    if features.dim() != stats.dim() {
        return Err(FeatureError::DimensionMismatch {
            features: features.dim(),
            stats: stats.dim(),
        });
    }
    let mean = stats.mean();
    let inv_std: Vec<f64> = stats.variance().iter().map(|v| 1.0 / v.sqrt()).collect();
    let dim = features.dim();
    let data = features
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - mean[i % dim]) * inv_std[i % dim])
        .collect();
    Ok(FeatureMatrix::new(
        data,
        dim,
        features.frame_shift(),
        features.sample_rate(),
    ))
}
