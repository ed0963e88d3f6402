//! Short-time Fourier transform with Hann windowing and reflect padding.

use crate::audio::AudioClip;
use crate::fft::fft;
use crate::{Error, Result};
use num_complex::Complex;
use std::f64::consts::PI;

pub const FRAME_LEN: usize = 2048;
pub const HOP: usize = 512;

/// Complex STFT: (1 + frame_len/2) frequency rows by `frames` columns,
/// column t centered at sample t*hop of the unpadded signal.
#[derive(Debug, Clone)]
pub struct Stft {
    pub data: Vec<Complex<f64>>,
    pub bins: usize,
    pub frames: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Stft {
    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> Complex<f64> {
        self.data[frame * self.bins + bin]
    }

    /// Magnitude of one frame across all bins.
    pub fn magnitude_frame(&self, frame: usize) -> Vec<f64> {
        self.data[frame * self.bins..(frame + 1) * self.bins]
            .iter()
            .map(|c| c.norm())
            .collect()
    }

    /// |X|^2 of one frame across all bins.
    pub fn power_frame(&self, frame: usize) -> Vec<f64> {
        self.data[frame * self.bins..(frame + 1) * self.bins]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    }

    /// Frequency in Hz of bin k.
    #[inline]
    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.frame_len as f64
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }
}

pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Mirror an out-of-range index back into [0, len) without repeating the
/// edge sample.
fn reflect(mut idx: isize, len: usize) -> usize {
    let n = len as isize;
    loop {
        if idx < 0 {
            idx = -idx;
        } else if idx >= n {
            idx = 2 * (n - 1) - idx;
        } else {
            return idx as usize;
        }
    }
}

/// Centered time-domain frame t of the reflect-padded signal, unwindowed.
pub(crate) fn time_frame(samples: &[f64], frame: usize, frame_len: usize, hop: usize) -> Vec<f64> {
    let start = frame as isize * hop as isize - frame_len as isize / 2;
    (0..frame_len)
        .map(|i| samples[reflect(start + i as isize, samples.len())])
        .collect()
}


/// Energy of the Hann-windowed centered frame, for Parseval checks.
pub fn windowed_frame_energy(clip: &AudioClip, frame: usize) -> f64 {
    let w = hann_window(FRAME_LEN);
    time_frame(&clip.samples, frame, FRAME_LEN, HOP)
        .iter()
        .zip(&w)
        .map(|(&x, &wv)| (x * wv) * (x * wv))
        .sum()
}

pub(crate) fn num_frames(len: usize, hop: usize) -> usize {
    len / hop + 1
}

pub fn stft(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<Stft> {
    assert!(frame_len.is_power_of_two(), "frame_len must be a power of two");
    assert!(hop <= frame_len, "hop must not exceed frame_len");
    if clip.samples.len() < frame_len {
        return Err(Error::InputTooShort {
            need: frame_len,
            got: clip.samples.len(),
        });
    }
    let frames = num_frames(clip.samples.len(), hop);
    let bins = frame_len / 2 + 1;
    let window = hann_window(frame_len);
    let mut data = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex::new(0.0, 0.0); frame_len];
    for t in 0..frames {
        let frame = time_frame(&clip.samples, t, frame_len, hop);
        for (b, (&x, &w)) in frame.iter().zip(&window).enumerate() {
            buf[b] = Complex::new(x * w, 0.0);
        }
        fft(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(Stft {
        data,
        bins,
        frames,
        frame_len,
        hop,
        sample_rate: clip.sample_rate,
    })
}
