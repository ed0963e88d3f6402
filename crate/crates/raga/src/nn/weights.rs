//! Weight file format: magic "RGLB", version u16, layer count, then per
//! layer a kind tag and its state tensors (shape list, fp32 little-endian
//! data). Round trips are bit-exact.

use super::{LayerKind, Network, Scalar};
use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RGLB";
const VERSION: u16 = 1;

pub fn save_weights<F: Scalar>(net: &Network<F>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        w.write_all(&[layer.kind().tag()])?;
        let tensors = layer.state_tensors();
        w.write_all(&[tensors.len() as u8])?;
        for t in tensors {
            w.write_all(&[t.shape.len() as u8])?;
            for &d in &t.shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in &t.data {
                w.write_all(&v.to_f32().to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Load weights into a network of the exact same architecture.
pub fn load_weights<F: Scalar>(net: &mut Network<F>, path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CorruptHeader("bad weight file magic".into()));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::CorruptHeader(format!("unsupported weight version {version}")));
    }
    let n_layers = read_u32(&mut r)? as usize;
    if n_layers != net.layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "weight file has {n_layers} layers, model has {}",
            net.layers.len()
        )));
    }
    for (li, layer) in net.layers.iter_mut().enumerate() {
        let tag = read_u8(&mut r)?;
        let kind = LayerKind::from_tag(tag)
            .ok_or_else(|| Error::CorruptHeader(format!("unknown layer tag {tag}")))?;
        if kind != layer.kind() {
            return Err(Error::ShapeMismatch(format!(
                "layer {li}: file has {kind:?}, model has {:?}",
                layer.kind()
            )));
        }
        let n_tensors = read_u8(&mut r)? as usize;
        let tensors = layer.state_tensors_mut();
        if n_tensors != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "layer {li}: tensor count {n_tensors} vs {}",
                tensors.len()
            )));
        }
        for t in tensors {
            let ndim = read_u8(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u32(&mut r)? as usize);
            }
            if shape != t.shape {
                return Err(Error::ShapeMismatch(format!(
                    "layer {li}: tensor shape {shape:?} vs {:?}",
                    t.shape
                )));
            }
            let mut buf = vec![0u8; t.data.len() * 4];
            r.read_exact(&mut buf)?;
            for (v, chunk) in t.data.iter_mut().zip(buf.chunks_exact(4)) {
                *v = F::from_f32(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{BatchNorm, Dense, Init, Layer, Relu};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use tempfile::tempdir;

    fn small_net(seed: u64) -> Network<f32> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Network::new(vec![
            Layer::Dense(Dense::new(&mut rng, 4, 8, Init::He)),
            Layer::Relu(Relu::new()),
            Layer::BatchNorm(BatchNorm::new(8)),
            Layer::Dense(Dense::new(&mut rng, 8, 3, Init::Glorot)),
        ])
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = small_net(42);
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.rglb");
        save_weights(&net, &path).unwrap();

        let mut other = small_net(999);
        assert_ne!(other.snapshot(), net.snapshot());
        load_weights(&mut other, &path).unwrap();
        assert_eq!(other.snapshot(), net.snapshot());

        // saving again produces identical bytes
        let path2 = dir.path().join("w2.rglb");
        save_weights(&other, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn mismatched_architecture_rejected() {
        let net = small_net(1);
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.rglb");
        save_weights(&net, &path).unwrap();

        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut wrong = Network::<f32>::new(vec![Layer::Dense(Dense::new(&mut rng, 4, 8, Init::He))]);
        assert!(load_weights(&mut wrong, &path).is_err());
    }

    #[test]
    fn corrupt_magic_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.rglb");
        std::fs::write(&path, b"NOPE____").unwrap();
        let mut net = small_net(1);
        assert!(matches!(
            load_weights(&mut net, &path),
            Err(Error::CorruptHeader(_))
        ));
    }
}
