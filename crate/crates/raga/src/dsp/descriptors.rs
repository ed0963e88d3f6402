//! Per-frame scalar descriptors: RMS energy, spectral centroid, bandwidth,
//! rolloff, and zero-crossing rate.

use super::stft::{num_frames, stft, time_frame, FRAME_LEN, HOP};
use crate::audio::AudioClip;
use crate::Result;

const ROLLOFF_PERCENT: f64 = 0.85;

/// One value per frame for each descriptor; all vectors share one frame
/// count.
#[derive(Debug, Clone)]
pub struct FrameDescriptors {
    pub rmse: Vec<f64>,
    pub centroid: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub rolloff: Vec<f64>,
    pub zcr: Vec<f64>,
}

pub fn frame_descriptors(clip: &AudioClip) -> Result<FrameDescriptors> {
    let s = stft(clip, FRAME_LEN, HOP)?;
    let frames = num_frames(clip.samples.len(), HOP);
    debug_assert_eq!(frames, s.frames);

    let mut d = FrameDescriptors {
        rmse: Vec::with_capacity(frames),
        centroid: Vec::with_capacity(frames),
        bandwidth: Vec::with_capacity(frames),
        rolloff: Vec::with_capacity(frames),
        zcr: Vec::with_capacity(frames),
    };

    for t in 0..frames {
        // time-domain descriptors on the same centered framing
        let frame = time_frame(&clip.samples, t, FRAME_LEN, HOP);
        let rms = (frame.iter().map(|&x| x * x).sum::<f64>() / FRAME_LEN as f64).sqrt();
        let crossings = frame
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        d.rmse.push(rms);
        d.zcr.push(crossings as f64 / (FRAME_LEN - 1) as f64);

        // spectral descriptors on the magnitude spectrum
        let mag = s.magnitude_frame(t);
        let total: f64 = mag.iter().sum();
        if total <= 0.0 {
            d.centroid.push(0.0);
            d.bandwidth.push(0.0);
            d.rolloff.push(0.0);
            continue;
        }
        let centroid = mag
            .iter()
            .enumerate()
            .map(|(k, &m)| s.bin_freq(k) * m)
            .sum::<f64>()
            / total;
        let var = mag
            .iter()
            .enumerate()
            .map(|(k, &m)| m * (s.bin_freq(k) - centroid).powi(2))
            .sum::<f64>()
            / total;
        let mut cum = 0.0;
        let mut rolloff = s.bin_freq(s.bins - 1);
        for (k, &m) in mag.iter().enumerate() {
            cum += m;
            if cum >= ROLLOFF_PERCENT * total {
                rolloff = s.bin_freq(k);
                break;
            }
        }
        d.centroid.push(centroid);
        d.bandwidth.push(var.sqrt());
        d.rolloff.push(rolloff);
    }
    Ok(d)
}
