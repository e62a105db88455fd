//! SpecAugment masking and frame-stacking time reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FeatureError, FeatureMatrix};

/// Mask counts and maximum widths for [`spec_augment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecAugmentConfig {
    pub n_time_masks: usize,
    pub max_time_width: usize,
    pub n_freq_masks: usize,
    pub max_freq_width: usize,
}

/// Zeroes random time and frequency bands. Masked cells are set to 0.0
/// (the global mean after CMVN); unmasked cells are bit-identical to the
/// input. Deterministic per seed.
pub fn spec_augment(
    features: &FeatureMatrix,
    config: &SpecAugmentConfig,
    seed: u64,
) -> FeatureMatrix {
    let mut out = features.clone();
    let t = out.num_frames();
    let dim = out.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..config.n_time_masks {
        let width = rng.gen_range(0..=config.max_time_width.min(t));
        let start = rng.gen_range(0..=t - width);
        for frame in start..start + width {
            out.frame_mut(frame).fill(0.0);
        }
    }
    for _ in 0..config.n_freq_masks {
        let width = rng.gen_range(0..=config.max_freq_width.min(dim));
        let start = rng.gen_range(0..=dim - width);
        for frame in 0..t {
            out.frame_mut(frame)[start..start + width].fill(0.0);
        }
    }
    out
}

/// Models the encoder's time downsampling as frame stacking: every `factor`
/// consecutive frames concatenate into one frame of width `dim * factor`,
/// tail frames beyond the last full group are dropped, and the frame shift
/// grows by `factor`.
pub fn reduce_time_resolution(
    features: &FeatureMatrix,
    factor: usize,
) -> Result<FeatureMatrix, FeatureError> {
    if factor < 1 {
        return Err(FeatureError::BadReductionFactor);
    }
    let t_out = features.num_frames() / factor;
    let dim = features.dim();
    let mut data = Vec::with_capacity(t_out * dim * factor);
    for group in 0..t_out {
        for f in 0..factor {
            data.extend_from_slice(features.frame(group * factor + f));
        }
    }
    Ok(FeatureMatrix::new(
        data,
        dim * factor,
        features.frame_shift() * factor as f64,
        features.sample_rate(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(t: usize, dim: usize) -> FeatureMatrix {
        let data: Vec<f64> = (0..t * dim).map(|i| i as f64 + 1.0).collect();
        FeatureMatrix::new(data, dim, 0.010, 16_000)
    }

    #[test]
    fn zero_masks_is_identity() {
        let f = ramp(20, 8);
        let cfg = SpecAugmentConfig {
            n_time_masks: 0,
            max_time_width: 5,
            n_freq_masks: 0,
            max_freq_width: 3,
        };
        assert_eq!(spec_augment(&f, &cfg, 1), f);
    }

    #[test]
    fn one_freq_mask_zeroes_one_contiguous_band() {
        let f = ramp(10, 16);
        let cfg = SpecAugmentConfig {
            n_time_masks: 0,
            max_time_width: 0,
            n_freq_masks: 1,
            max_freq_width: 10,
        };
        let masked = spec_augment(&f, &cfg, 3);
        // Every frame has the same zeroed band of width <= 10.
        let zeroed: Vec<usize> = (0..16).filter(|&d| masked.frame(0)[d] == 0.0).collect();
        assert!(zeroed.len() <= 10);
        if !zeroed.is_empty() {
            assert!(zeroed.windows(2).all(|w| w[1] == w[0] + 1), "band not contiguous");
        }
        for t in 0..10 {
            for d in 0..16 {
                if zeroed.contains(&d) {
                    assert_eq!(masked.frame(t)[d], 0.0);
                } else {
                    assert_eq!(masked.frame(t)[d], f.frame(t)[d]);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let f = ramp(30, 8);
        let cfg = SpecAugmentConfig {
            n_time_masks: 2,
            max_time_width: 6,
            n_freq_masks: 2,
            max_freq_width: 3,
        };
        assert_eq!(spec_augment(&f, &cfg, 42), spec_augment(&f, &cfg, 42));
    }

    #[test]
    fn reduction_stacks_frames_and_scales_shift() {
        let f = ramp(2998, 80);
        let r = reduce_time_resolution(&f, 4).unwrap();
        assert_eq!(r.num_frames(), 749);
        assert_eq!(r.dim(), 320);
        assert!((r.frame_shift() - 0.040).abs() < 1e-12);
        // First stacked frame is the first four input frames, in order.
        let expected: Vec<f64> = (0..4).flat_map(|t| f.frame(t).to_vec()).collect();
        assert_eq!(r.frame(0), expected.as_slice());

        let half = reduce_time_resolution(&f, 2).unwrap();
        assert!((half.frame_shift() - 0.020).abs() < 1e-12);
    }

    #[test]
    fn factor_one_is_identity() {
        let f = ramp(7, 4);
        assert_eq!(reduce_time_resolution(&f, 1).unwrap(), f);
    }

    #[test]
    fn reduction_preserves_retained_energy() {
        let f = ramp(11, 4); // 11 frames, factor 3 keeps 9
        let r = reduce_time_resolution(&f, 3).unwrap();
        let kept: f64 = (0..9).flat_map(|t| f.frame(t)).sum();
        let out: f64 = r.values().iter().sum();
        assert_eq!(out, kept);
    }
}
