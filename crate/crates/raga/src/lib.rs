//! Carnatic raga classification toolkit.
//!
//! Two preprocessing paths feed four classifiers: a 30-dimensional numeric
//! feature vector per 5-second audio segment (1-D CNN, LSTM, ANN) and a
//! 256x256 RGB mel-spectrogram image per segment (2-D CNN). A from-scratch
//! training engine with hand-derived backpropagation drives all four, and an
//! evaluation module produces confusion matrices, accuracies, and pairwise
//! misclassification rates for same-swara raga pairs.

pub mod audio;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fft;
pub mod models;
pub mod nn;
pub mod render;

pub use error::{Error, Result};
