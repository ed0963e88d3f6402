//! WAV decoding, mono mixdown, resampling, and fixed-length segmentation.

use crate::{Error, Result};
use std::f64::consts::PI;
use std::path::Path;

/// Canonical analysis sample rate used by every DSP default.
pub const ANALYSIS_RATE: u32 = 22050;

/// Mono sample buffer with its sample rate; the unit of all DSP input.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decode a RIFF/WAVE file (PCM16 or IEEE float32, 1-2 channels) to a mono
/// clip. Stereo is mixed down by per-sample mean; PCM16 is scaled by 1/32768.
pub fn load_audio(path: &Path) -> Result<AudioClip> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::FormatError(msg) => Error::CorruptHeader(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported wav format".into()),
        other => Error::Wav(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{} channels (1 or 2 supported)",
            spec.channels
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(e.to_string()))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{fmt:?} {bits}-bit (PCM16 or float32 supported)"
            )))
        }
    };
    let channels = spec.channels as usize;
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".into());
    Ok(AudioClip::new(mono, spec.sample_rate, source_id))
}

/// Write a mono clip as PCM16 WAV.
pub fn save_wav(clip: &AudioClip, path: &Path) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::Wav(e.to_string()))?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| Error::Wav(e.to_string()))?;
    }
    writer.finalize().map_err(|e| Error::Wav(e.to_string()))?;
    Ok(())
}

const SINC_HALF_WIDTH: usize = 32;

/// Band-limited resampling via Hann-windowed sinc interpolation. The
/// identity rate returns the input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate > 0, "target_rate must be positive");
    if target_rate == clip.sample_rate {
        return clip.clone();
    }
    let ratio = target_rate as f64 / clip.sample_rate as f64;
    let out_len = (clip.samples.len() as f64 * ratio).round() as usize;
    // when downsampling, widen the kernel and lower its cutoff to the
    // target Nyquist
    let cutoff = ratio.min(1.0);
    let half_width = (SINC_HALF_WIDTH as f64 / cutoff).ceil() as isize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i as f64 / ratio;
        let left = center.floor() as isize - half_width + 1;
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for j in left..left + 2 * half_width {
            if j < 0 || j as usize >= clip.samples.len() {
                continue;
            }
            let d = center - j as f64;
            let sinc = if d.abs() < 1e-12 {
                1.0
            } else {
                let z = PI * cutoff * d;
                z.sin() / z
            };
            // Hann taper over the kernel support
            let w = 0.5 + 0.5 * (PI * d / half_width as f64).cos();
            let k = cutoff * sinc * w;
            acc += clip.samples[j as usize] * k;
            wsum += k;
        }
        // normalize so DC passes at unit gain near the edges too
        out.push(if wsum.abs() > 1e-9 { acc / wsum * dc_gain(cutoff) } else { acc });
    }
    AudioClip::new(out, target_rate, clip.source_id.clone())
}

// kernel already sums to ~1 per output sample; normalization by wsum keeps
// edge samples unbiased, and interior gain stays 1
fn dc_gain(_cutoff: f64) -> f64 {
    1.0
}

/// Split a clip into consecutive non-overlapping windows of
/// `round(seconds * sample_rate)` samples; a trailing remainder shorter
/// than the window is discarded.
pub fn segment(clip: &AudioClip, seconds: f64) -> Result<Vec<AudioClip>> {
    assert!(seconds > 0.0, "segment length must be positive");
    let win = (seconds * clip.sample_rate as f64).round() as usize;
    if clip.samples.len() < win {
        return Err(Error::EmptyInput(format!(
            "clip {} shorter than one {seconds}s window",
            clip.source_id
        )));
    }
    Ok(clip
        .samples
        .chunks_exact(win)
        .enumerate()
        .map(|(i, chunk)| {
            AudioClip::new(
                chunk.to_vec(),
                clip.sample_rate,
                format!("{}_seg{:03}", clip.source_id, i),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::fft_real;
    use tempfile::tempdir;

    fn sine(freq: f64, rate: u32, secs: f64) -> AudioClip {
        let n = (secs * rate as f64) as usize;
        let samples = (0..n)
            .map(|t| (2.0 * PI * freq * t as f64 / rate as f64).sin())
            .collect();
        AudioClip::new(samples, rate, "sine")
    }

    /// Dominant frequency via a naive padded DFT over a power-of-two prefix.
    fn dominant_freq(clip: &AudioClip) -> f64 {
        let n = clip.samples.len().next_power_of_two() / 2;
        let spec = fft_real(&clip.samples[..n]);
        let argmax = (1..n / 2)
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        argmax as f64 * clip.sample_rate as f64 / n as f64
    }

    #[test]
    fn pcm16_scaling_and_mixdown() {
        let dir = tempdir().unwrap();

        // mono silence
        let path = dir.path().join("silence.wav");
        save_wav(&AudioClip::new(vec![0.0; 22050], 22050, "s"), &path).unwrap();
        let clip = load_audio(&path).unwrap();
        assert_eq!(clip.samples.len(), 22050);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
        assert_eq!(clip.sample_rate, 22050);

        // raw PCM16 values -32768 and 16384 decode to -1.0 and 0.5
        let path2 = dir.path().join("levels.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path2, spec).unwrap();
        w.write_sample(-32768i16).unwrap();
        w.write_sample(16384i16).unwrap();
        w.finalize().unwrap();
        let clip = load_audio(&path2).unwrap();
        assert_eq!(clip.samples, vec![-1.0, 0.5]);

        // symmetric stereo mixes to zero
        let path3 = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 22050,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path3, spec).unwrap();
        for _ in 0..100 {
            w.write_sample(0.5f32).unwrap();
            w.write_sample(-0.5f32).unwrap();
        }
        w.finalize().unwrap();
        let clip = load_audio(&path3).unwrap();
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_audio(Path::new("/nonexistent/x.wav")),
            Err(Error::FileNotFound(_))
        ));
        let dir = tempdir().unwrap();
        let path = dir.path().join("garbage.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(load_audio(&path).is_err());
    }

    #[test]
    fn resample_identity_is_bit_identical() {
        let clip = sine(440.0, 22050, 0.5);
        let out = resample(&clip, 22050);
        assert_eq!(out.samples, clip.samples);
    }

    #[test]
    fn resample_preserves_tone_and_duration() {
        let clip = sine(440.0, 44100, 1.0);
        let out = resample(&clip, 22050);
        assert!((out.samples.len() as i64 - 22050).unsigned_abs() <= 1);
        let f = dominant_freq(&out);
        let bin_width = 22050.0 / (out.samples.len().next_power_of_two() / 2) as f64;
        assert!((f - 440.0).abs() <= bin_width, "dominant {f} Hz");
    }

    #[test]
    fn resample_halving_length() {
        let clip = sine(440.0, 22050, 1.0);
        let out = resample(&clip, 11025);
        let expect = clip.samples.len() as i64 / 2;
        assert!((out.samples.len() as i64 - expect).abs() <= 1);
    }

    #[test]
    fn segment_counts_and_identity() {
        let rate = 22050;
        let clip = AudioClip::new(vec![0.25; 17 * rate as usize], rate, "long");
        let segs = segment(&clip, 5.0).unwrap();
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.samples.len() == 5 * rate as usize));
        assert_eq!(segs[0].source_id, "long_seg000");

        let five = AudioClip::new(vec![0.5; 5 * rate as usize], rate, "five");
        let segs = segment(&five, 5.0).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].samples, five.samples);

        let ten = AudioClip::new(vec![0.1; 10 * rate as usize], rate, "ten");
        let segs = segment(&ten, 5.0).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].samples.len(), 110250);

        let short = AudioClip::new(vec![0.1; 100], rate, "short");
        assert!(matches!(segment(&short, 5.0), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn segments_concatenate_to_input_prefix() {
        let rate = 1000;
        let clip = AudioClip::new((0..3700).map(|i| (i as f64).sin()).collect(), rate, "c");
        let segs = segment(&clip, 1.0).unwrap();
        let cat: Vec<f64> = segs.iter().flat_map(|s| s.samples.iter().copied()).collect();
        assert_eq!(cat, clip.samples[..cat.len()]);
    }
}
