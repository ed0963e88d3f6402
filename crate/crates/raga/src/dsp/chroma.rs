//! Octave-folded pitch-class energy (chroma) and CENS smoothing.

use super::stft::{hann_window, stft, FRAME_LEN, HOP};
use super::{BinAxis, FrameMatrix};
use crate::audio::AudioClip;
use crate::Result;

/// C0 for the equal-tempered scale referenced to A4 = 440 Hz; pitch class
/// 0 is C.
const C0_HZ: f64 = 440.0 * 0.03716272234383503; // 440 * 2^(-4.75)

/// Pitch class of a frequency: round(12 log2(f / C0)) mod 12.
pub fn pitch_class(freq: f64) -> usize {
    let pc = (12.0 * (freq / C0_HZ).log2()).round() as i64;
    pc.rem_euclid(12) as usize
}

/// Raw chroma energies: STFT power folded into 12 pitch classes, before
/// any per-frame normalization.
fn chroma_energy(clip: &AudioClip) -> Result<FrameMatrix> {
    let s = stft(clip, FRAME_LEN, HOP)?;
    let mut out = FrameMatrix::zeros(12, s.frames, BinAxis::PitchClass, s.frame_rate());
    for t in 0..s.frames {
        let power = s.power_frame(t);
        for (k, &p) in power.iter().enumerate().skip(1) {
            if p > 0.0 {
                let pc = pitch_class(s.bin_freq(k));
                out.set(pc, t, out.get(pc, t) + p);
            }
        }
    }
    Ok(out)
}

/// Chroma STFT: 12 pitch-class rows, each frame normalized by its maximum
/// (all-zero frames stay zero).
pub fn chroma_stft(clip: &AudioClip) -> Result<FrameMatrix> {
    let mut out = chroma_energy(clip)?;
    for t in 0..out.frames {
        let mx = (0..12).map(|b| out.get(b, t)).fold(0.0f64, f64::max);
        if mx > 0.0 {
            for b in 0..12 {
                out.set(b, t, out.get(b, t) / mx);
            }
        }
    }
    Ok(out)
}

const CENS_THRESHOLDS: [(f64, f64); 4] = [(0.4, 1.0), (0.2, 0.75), (0.1, 0.5), (0.05, 0.25)];

fn quantize(v: f64) -> f64 {
    for &(thr, q) in &CENS_THRESHOLDS {
        if v >= thr {
            return q;
        }
    }
    0.0
}

/// Chroma energy normalized statistics: l1-normalize per frame, quantize,
/// smooth each class over time with a Hann window, downsample, then
/// l2-normalize per frame.
pub fn chroma_cens(clip: &AudioClip, smooth_len: usize, downsample: usize) -> Result<FrameMatrix> {
    let raw = chroma_energy(clip)?;
    let frames = raw.frames;

    // per-frame l1 normalization then amplitude quantization
    let mut quant = FrameMatrix::zeros(12, frames, BinAxis::PitchClass, raw.frame_rate);
    for t in 0..frames {
        let l1: f64 = (0..12).map(|b| raw.get(b, t)).sum();
        if l1 > 0.0 {
            for b in 0..12 {
                quant.set(b, t, quantize(raw.get(b, t) / l1));
            }
        }
    }

    // temporal Hann smoothing per class ("same" convolution), then
    // downsampling
    let win = hann_window(smooth_len);
    let half = smooth_len / 2;
    let out_frames = frames.div_ceil(downsample);
    let mut out = FrameMatrix::zeros(
        12,
        out_frames,
        BinAxis::PitchClass,
        raw.frame_rate / downsample as f64,
    );
    for (ot, t) in (0..frames).step_by(downsample).enumerate() {
        for b in 0..12 {
            let mut acc = 0.0;
            for (i, &w) in win.iter().enumerate() {
                let src = t as isize + i as isize - half as isize;
                if src >= 0 && (src as usize) < frames {
                    acc += w * quant.get(b, src as usize);
                }
            }
            out.set(b, ot, acc);
        }
    }

    // per-frame l2 normalization
    for t in 0..out_frames {
        let l2: f64 = (0..12).map(|b| out.get(b, t).powi(2)).sum::<f64>().sqrt();
        if l2 > 0.0 {
            for b in 0..12 {
                out.set(b, t, out.get(b, t) / l2);
            }
        }
    }
    Ok(out)
}
