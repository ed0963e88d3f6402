//! Aggregation of all per-frame features into the canonical 30-dimensional
//! descriptor.
//!
//! Layout: 0-18 mean MFCC coefficients, 19 mean chroma, 20 mean CENS,
//! 21 mean RMS energy, 22/23 mean and std of nonzero pitches, 24/25 mean
//! and std of nonzero peak magnitudes, 26 mean centroid, 27 mean bandwidth,
//! 28 mean rolloff, 29 mean zero-crossing rate.

use super::{chroma_cens, chroma_stft, frame_descriptors, mfcc, piptrack, N_MFCC};
use crate::audio::AudioClip;
use crate::Result;

pub const FEATURE_DIM: usize = 30;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "mfcc00", "mfcc01", "mfcc02", "mfcc03", "mfcc04", "mfcc05", "mfcc06", "mfcc07", "mfcc08",
    "mfcc09", "mfcc10", "mfcc11", "mfcc12", "mfcc13", "mfcc14", "mfcc15", "mfcc16", "mfcc17",
    "mfcc18", "chroma_stft", "chroma_cens", "rmse", "pitch_mean", "pitch_std", "mag_mean",
    "mag_std", "centroid", "bandwidth", "rolloff", "zcr",
];

/// The 30-dimensional aggregated descriptor with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
    pub label: Option<usize>,
    pub source_id: String,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation; 0 for empty input.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|&x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn extract_feature_vector(clip: &AudioClip) -> Result<FeatureVector> {
    let mfcc_mat = mfcc(clip, N_MFCC)?;
    let chroma = chroma_stft(clip)?;
    let cens = chroma_cens(clip, 41, 10)?;
    let desc = frame_descriptors(clip)?;
    let track = piptrack(clip, 0.1)?;

    let mut v = [0.0; FEATURE_DIM];
    for k in 0..N_MFCC {
        v[k] = mean(mfcc_mat.row(k));
    }
    v[19] = chroma.mean();
    v[20] = cens.mean();
    v[21] = mean(&desc.rmse);

    let nonzero = track.nonzero();
    let pitches: Vec<f64> = nonzero.iter().map(|&(p, _)| p).collect();
    let mags: Vec<f64> = nonzero.iter().map(|&(_, m)| m).collect();
    v[22] = mean(&pitches);
    v[23] = std_dev(&pitches);
    v[24] = mean(&mags);
    v[25] = std_dev(&mags);

    v[26] = mean(&desc.centroid);
    v[27] = mean(&desc.bandwidth);
    v[28] = mean(&desc.rolloff);
    v[29] = mean(&desc.zcr);

    debug_assert!(v.iter().all(|x| x.is_finite()));
    Ok(FeatureVector {
        values: v,
        label: None,
        source_id: clip.source_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioClip;
    use std::f64::consts::PI;

    fn five_second_tone() -> AudioClip {
        let rate = 22050u32;
        let samples = (0..5 * rate as usize)
            .map(|t| 0.7 * (2.0 * PI * 440.0 * t as f64 / rate as f64).sin())
            .collect();
        AudioClip::new(samples, rate, "tone5s")
    }

    #[test]
    fn length_and_finiteness() {
        let fv = extract_feature_vector(&five_second_tone()).unwrap();
        assert_eq!(fv.values.len(), 30);
        assert!(fv.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn zero_clip_propagates_zeros_outside_mfcc() {
        let clip = AudioClip::new(vec![0.0; 5 * 22050], 22050, "z");
        let fv = extract_feature_vector(&clip).unwrap();
        // coefficient 0 is the DCT of the constant log-eps frame
        assert!(fv.values[0].abs() > 1.0);
        for &x in &fv.values[1..19] {
            assert!(x.abs() < 1e-9);
        }
        for &x in &fv.values[19..] {
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn determinism() {
        let clip = five_second_tone();
        let a = extract_feature_vector(&clip).unwrap();
        let b = extract_feature_vector(&clip).unwrap();
        assert_eq!(a.values, b.values);
    }
}
