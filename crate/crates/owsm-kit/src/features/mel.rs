//! Log-Mel filterbank extraction.

use rustfft::{num_complex::Complex, FftPlanner};

use super::{FeatureError, FeatureMatrix, HOP_SAMPLES, NUM_MEL_BINS, WINDOW_SAMPLES};

/// Energies below this floor are clamped before the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of the 80 mel triangles for a given sample rate.
/// This is the closed-form reference used by the pure-tone oracle.
pub fn mel_filter_centers_hz(sample_rate: u32) -> Vec<f64> {
    let nyquist = f64::from(sample_rate) / 2.0;
    let mel_max = hz_to_mel(nyquist);
    (1..=NUM_MEL_BINS)
        .map(|i| mel_to_hz(mel_max * i as f64 / (NUM_MEL_BINS + 1) as f64))
        .collect()
}

/// Triangle weights: `bank[m][k]` for mel bin m and FFT bin k, unit peak.
fn mel_filterbank(sample_rate: u32, n_fft: usize) -> Vec<Vec<f64>> {
    let nyquist = f64::from(sample_rate) / 2.0;
    let n_bins = n_fft / 2 + 1;
    let mel_points: Vec<f64> = (0..NUM_MEL_BINS + 2)
        .map(|i| mel_to_hz(hz_to_mel(nyquist) * i as f64 / (NUM_MEL_BINS + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / n_fft as f64;

    (0..NUM_MEL_BINS)
        .map(|m| {
            let (lo, center, hi) = (mel_points[m], mel_points[m + 1], mel_points[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Converts audio to an 80-band log-Mel [`FeatureMatrix`].
///
/// Frames are windowed with a 25 ms Hann window every 10 ms (no padding),
/// turned into a power spectrum, projected through the mel bank and floored
/// at [`LOG_FLOOR`] before the natural log.
pub fn log_mel(audio: &[f32], sample_rate: u32) -> Result<FeatureMatrix, FeatureError> {
    if audio.len() < WINDOW_SAMPLES {
        return Err(FeatureError::AudioTooShort(audio.len()));
    }
    let n_frames = 1 + (audio.len() - WINDOW_SAMPLES) / HOP_SAMPLES;
    let n_fft = WINDOW_SAMPLES;
    let n_bins = n_fft / 2 + 1;

    // Periodic Hann window, the usual STFT analysis choice.
    let window: Vec<f64> = (0..WINDOW_SAMPLES)
        .map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / WINDOW_SAMPLES as f64).cos())
        })
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let bank = mel_filterbank(sample_rate, n_fft);

    let mut data = Vec::with_capacity(n_frames * NUM_MEL_BINS);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0f64; n_bins];
    for t in 0..n_frames {
        let offset = t * HOP_SAMPLES;
        for i in 0..WINDOW_SAMPLES {
            buf[i] = Complex::new(f64::from(audio[offset + i]) * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in power.iter_mut().enumerate() {
            *p = buf[k].norm_sqr();
        }
        for weights in &bank {
            let energy: f64 = weights.iter().zip(&power).map(|(w, p)| w * p).sum();
            data.push(energy.max(LOG_FLOOR).ln());
        }
    }
    Ok(FeatureMatrix::new(data, NUM_MEL_BINS, 0.010, sample_rate))
}
