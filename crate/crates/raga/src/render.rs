//! Mel-spectrogram to 256x256 RGB image conversion and back to normalized
//! tensors for the image-path classifier.

use crate::dsp::FrameMatrix;
use crate::{Error, Result};
use std::path::Path;

pub const IMG_SIZE: usize = 256;
pub const TOP_DB: f64 = 80.0;

/// A 256x256 RGB image. Bytes in [0,255] at the file boundary;
/// [`ImageTensor::normalized`] rescales to [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    /// Row-major RGB bytes, length 256*256*3.
    pub bytes: Vec<u8>,
}

impl ImageTensor {
    pub fn normalized(&self) -> Vec<f32> {
        image_to_input(&self.bytes)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img: image::RgbImage =
            image::ImageBuffer::from_raw(IMG_SIZE as u32, IMG_SIZE as u32, self.bytes.clone())
                .expect("byte length matches 256x256x3");
        img.save(path)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let img = image::open(path)?.into_rgb8();
        if img.width() as usize != IMG_SIZE || img.height() as usize != IMG_SIZE {
            return Err(Error::ShapeMismatch(format!(
                "image {}x{} is not {IMG_SIZE}x{IMG_SIZE}",
                img.width(),
                img.height()
            )));
        }
        Ok(Self { bytes: img.into_raw() })
    }
}

/// 10*log10(m / max(m)) clamped to [-top_db, 0]; all-zero input maps to the
/// constant -top_db.
pub fn power_to_db(m: &FrameMatrix, top_db: f64) -> FrameMatrix {
    let mx = m.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut out = m.clone();
    if mx <= 0.0 {
        out.values.iter_mut().for_each(|v| *v = -top_db);
        return out;
    }
    for v in &mut out.values {
        let db = if *v <= 0.0 {
            -top_db
        } else {
            10.0 * (*v / mx).log10()
        };
        *v = db.clamp(-top_db, 0.0);
    }
    out
}

// Piecewise-linear perceptual colormap anchors (dark purple to light
// yellow), expanded to a 256-entry RGB lookup table so renders are
// bit-reproducible across platforms.
const COLORMAP_ANCHORS: [[u8; 3]; 9] = [
    [0, 0, 4],
    [28, 16, 68],
    [79, 18, 123],
    [129, 37, 129],
    [181, 54, 122],
    [229, 80, 100],
    [251, 135, 97],
    [254, 194, 135],
    [252, 253, 191],
];

/// The fixed 256-entry RGB lookup table.
pub fn colormap_lut() -> [[u8; 3]; 256] {
    let mut lut = [[0u8; 3]; 256];
    let segments = COLORMAP_ANCHORS.len() - 1;
    for (i, entry) in lut.iter_mut().enumerate() {
        let pos = i as f64 / 255.0 * segments as f64;
        let seg = (pos.floor() as usize).min(segments - 1);
        let frac = pos - seg as f64;
        for c in 0..3 {
            let a = COLORMAP_ANCHORS[seg][c] as f64;
            let b = COLORMAP_ANCHORS[seg + 1][c] as f64;
            entry[c] = (a + (b - a) * frac).round() as u8;
        }
    }
    lut
}

/// Bilinear sample of a (bins x frames) matrix at fractional coordinates.
fn sample(m: &FrameMatrix, bin: f64, frame: f64) -> f64 {
    let b0 = bin.floor() as usize;
    let t0 = frame.floor() as usize;
    let b1 = (b0 + 1).min(m.bins - 1);
    let t1 = (t0 + 1).min(m.frames - 1);
    let fb = bin - b0 as f64;
    let ft = frame - t0 as f64;
    m.get(b0, t0) * (1.0 - fb) * (1.0 - ft)
        + m.get(b1, t0) * fb * (1.0 - ft)
        + m.get(b0, t1) * (1.0 - fb) * ft
        + m.get(b1, t1) * fb * ft
}

/// Resize a dB matrix to 256x256 (frequency axis bottom-to-top) and map it
/// through the colormap.
pub fn render(m_db: &FrameMatrix) -> Result<ImageTensor> {
    if m_db.bins == 0 || m_db.frames == 0 {
        return Err(Error::EmptyMatrix);
    }
    let lut = colormap_lut();
    let mut bytes = Vec::with_capacity(IMG_SIZE * IMG_SIZE * 3);
    for row in 0..IMG_SIZE {
        // image row 0 is the highest frequency
        let bin = (1.0 - row as f64 / (IMG_SIZE - 1) as f64) * (m_db.bins - 1) as f64;
        for col in 0..IMG_SIZE {
            let frame = if m_db.frames > 1 {
                col as f64 / (IMG_SIZE - 1) as f64 * (m_db.frames - 1) as f64
            } else {
                0.0
            };
            let v = sample(m_db, bin, frame);
            let t = ((v + TOP_DB) / TOP_DB).clamp(0.0, 1.0);
            let idx = (t * 255.0).round() as usize;
            bytes.extend_from_slice(&lut[idx]);
        }
    }
    Ok(ImageTensor { bytes })
}

/// Byte image to normalized input: element-wise division by 255.
pub fn image_to_input(bytes: &[u8]) -> Vec<f32> {
    bytes.iter().map(|&b| b as f32 / 255.0).collect()
}
