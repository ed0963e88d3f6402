//! Spectral-peak pitch tracking with parabolic interpolation.

use super::stft::{stft, FRAME_LEN, HOP};
use super::{BinAxis, FrameMatrix};
use crate::audio::AudioClip;
use crate::Result;

/// Interpolated peak frequencies and magnitudes, written at each peak's
/// bin position; zeros elsewhere.
#[derive(Debug, Clone)]
pub struct PitchTrack {
    pub pitches: FrameMatrix,
    pub magnitudes: FrameMatrix,
}

impl PitchTrack {
    /// All nonzero (pitch, magnitude) pairs across the track.
    pub fn nonzero(&self) -> Vec<(f64, f64)> {
        self.pitches
            .values
            .iter()
            .zip(&self.magnitudes.values)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &m)| (p, m))
            .collect()
    }
}

/// Local spectral maxima above `threshold * frame_max`, refined by
/// parabolic interpolation over the peak and its two neighbors.
pub fn piptrack(clip: &AudioClip, threshold: f64) -> Result<PitchTrack> {
    let s = stft(clip, FRAME_LEN, HOP)?;
    let mut pitches = FrameMatrix::zeros(s.bins, s.frames, BinAxis::FftBin, s.frame_rate());
    let mut magnitudes = pitches.clone();
    for t in 0..s.frames {
        let mag = s.magnitude_frame(t);
        let frame_max = mag.iter().fold(0.0f64, |a, &b| a.max(b));
        if frame_max <= 0.0 {
            continue;
        }
        let thr = threshold * frame_max;
        for k in 1..s.bins - 1 {
            if mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] >= thr {
                let denom = mag[k - 1] - 2.0 * mag[k] + mag[k + 1];
                let shift = if denom.abs() < 1e-30 {
                    0.0
                } else {
                    0.5 * (mag[k - 1] - mag[k + 1]) / denom
                };
                let shift = shift.clamp(-0.5, 0.5);
                let freq = (k as f64 + shift) * clip.sample_rate as f64 / s.frame_len as f64;
                let peak_mag = mag[k] - 0.25 * (mag[k - 1] - mag[k + 1]) * shift;
                pitches.set(k, t, freq);
                magnitudes.set(k, t, peak_mag);
            }
        }
    }
    Ok(PitchTrack { pitches, magnitudes })
}
