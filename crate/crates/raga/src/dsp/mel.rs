//! Slaney-style mel filterbank, mel power spectrogram, and MFCCs.

use super::stft::{stft, FRAME_LEN, HOP};
use super::{BinAxis, FrameMatrix};
use crate::audio::AudioClip;
use crate::Result;

pub const N_MELS: usize = 128;
pub const N_MFCC: usize = 19;
const LOG_EPS: f64 = 1e-10;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    (6.4f64).ln() / 27.0
}

/// Hz to mel, Slaney variant: linear below 1000 Hz, logarithmic above.
pub fn hz_to_mel(f: f64) -> f64 {
    if f < MIN_LOG_HZ {
        f / F_SP
    } else {
        MIN_LOG_MEL + (f / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    if m < MIN_LOG_MEL {
        m * F_SP
    } else {
        MIN_LOG_HZ * ((m - MIN_LOG_MEL) * log_step()).exp()
    }
}

/// Triangular mel filterbank, area-normalized, as an
/// (n_mels x (1 + n_fft/2)) row-major matrix.
pub fn mel_filterbank(
    sample_rate: u32,
    n_fft: usize,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
) -> Vec<f64> {
    assert!(fmin < fmax && fmax <= sample_rate as f64 / 2.0 + 1e-9);
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    // n_mels + 2 edge frequencies equally spaced on the mel scale
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_freq = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;

    let mut fb = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        // Slaney area normalization
        let norm = 2.0 / (hi - lo);
        for k in 0..n_bins {
            let f = bin_freq(k);
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= center {
                (f - lo) / (center - lo)
            } else {
                (hi - f) / (hi - center)
            };
            fb[m * n_bins + k] = w * norm;
        }
    }
    fb
}

/// Center frequencies (Hz) of the filters of [`mel_filterbank`].
pub fn mel_centers(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    (1..=n_mels)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Mel power spectrogram: filterbank applied to |STFT|^2.
pub fn mel_spectrogram(clip: &AudioClip) -> Result<FrameMatrix> {
    let s = stft(clip, FRAME_LEN, HOP)?;
    let fb = mel_filterbank(
        clip.sample_rate,
        FRAME_LEN,
        N_MELS,
        0.0,
        clip.sample_rate as f64 / 2.0,
    );
    let mut out = FrameMatrix::zeros(N_MELS, s.frames, BinAxis::MelBand, s.frame_rate());
    for t in 0..s.frames {
        let power = s.power_frame(t);
        for m in 0..N_MELS {
            let row = &fb[m * s.bins..(m + 1) * s.bins];
            let v: f64 = row.iter().zip(&power).map(|(&w, &p)| w * p).sum();
            out.set(m, t, v);
        }
    }
    Ok(out)
}

/// Orthonormal DCT-II over one column vector, keeping `n_out` coefficients.
fn dct2_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    let pi = std::f64::consts::PI;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * (pi * (i as f64 + 0.5) * k as f64 / n).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// MFCCs: per-frame orthonormal DCT-II of log(mel + eps), coefficients
/// 0..n_coeff.
pub fn mfcc(clip: &AudioClip, n_coeff: usize) -> Result<FrameMatrix> {
    let mel = mel_spectrogram(clip)?;
    let mut out = FrameMatrix::zeros(n_coeff, mel.frames, BinAxis::MfccCoeff, mel.frame_rate);
    for t in 0..mel.frames {
        let logmel: Vec<f64> = mel.column(t).iter().map(|&v| (v + LOG_EPS).ln()).collect();
        let coeffs = dct2_ortho(&logmel, n_coeff);
        for (k, &c) in coeffs.iter().enumerate() {
            out.set(k, t, c);
        }
    }
    Ok(out)
}
