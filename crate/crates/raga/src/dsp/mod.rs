//! Per-frame audio features: STFT, mel spectrogram, MFCC, chroma/CENS,
//! spectral descriptors, pitch tracking, and the aggregated 30-dimensional
//! feature vector consumed by the numeric-path models.

pub mod chroma;
pub mod descriptors;
pub mod features;
pub mod mel;
pub mod pitch;
pub mod stft;

pub use chroma::{chroma_cens, chroma_stft};
pub use descriptors::{frame_descriptors, FrameDescriptors};
pub use features::{extract_feature_vector, FeatureVector, FEATURE_DIM, FEATURE_NAMES};
pub use mel::{mel_filterbank, mel_spectrogram, mfcc, N_MELS, N_MFCC};
pub use pitch::{piptrack, PitchTrack};
pub use stft::{stft, Stft, FRAME_LEN, HOP};

/// Which quantity the row axis of a [`FrameMatrix`] indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinAxis {
    FftBin,
    MelBand,
    PitchClass,
    MfccCoeff,
}

/// A (bins x frames) real matrix; carrier for spectrograms, chroma and
/// MFCC sequences. Row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub values: Vec<f64>,
    pub bins: usize,
    pub frames: usize,
    pub bin_axis: BinAxis,
    pub frame_rate: f64,
}

impl FrameMatrix {
    pub fn zeros(bins: usize, frames: usize, bin_axis: BinAxis, frame_rate: f64) -> Self {
        Self {
            values: vec![0.0; bins * frames],
            bins,
            frames,
            bin_axis,
            frame_rate,
        }
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.frames + frame]
    }

    #[inline]
    pub fn set(&mut self, bin: usize, frame: usize, v: f64) {
        self.values[bin * self.frames + frame] = v;
    }

    /// Row slice for one bin across all frames.
    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.frames..(bin + 1) * self.frames]
    }

    /// Column (one frame across all bins) as an owned vector.
    pub fn column(&self, frame: usize) -> Vec<f64> {
        (0..self.bins).map(|b| self.get(b, frame)).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}
