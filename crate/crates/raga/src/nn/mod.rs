//! Minimal deterministic neural-network training engine: exactly the layer
//! and optimizer vocabulary the four classifier architectures need, with
//! hand-derived backpropagation. Generic over f32 (training) and f64
//! (gradient checking).

mod layers;
mod loss;
pub mod matmul;
mod optim;
mod train;
mod weights;

pub use layers::{
    BatchNorm, Conv1d, Conv2d, Dense, Dropout, Flatten, Init, Layer, LayerKind, Lstm, MaxPool2d,
    Relu,
};
pub use loss::{loss_sparse_ce, softmax_rows, sparse_ce_from_logits};
pub use matmul::matmul;
pub use optim::{Optimizer, OptimizerKind};
pub use train::{evaluate, train, ClassDataset, EarlyStopping, EpochStats, TrainConfig, TrainReport};
pub use weights::{load_weights, save_weights};

use rand_chacha::ChaCha20Rng;

/// Element type of the engine: f32 for training, f64 for gradient checks.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Copy + Send + Sync + std::fmt::Debug + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32(x: f32) -> Self;
    fn to_f32(self) -> f32;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f32(x: f32) -> Self {
        x
    }
    fn to_f32(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f32(x: f32) -> Self {
        x as f64
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub shape: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }
}

/// Network: an ordered layer stack ending (by construction in the model
/// builders) in a dense layer whose logits feed softmax + cross-entropy.
pub struct Network<F: Scalar> {
    pub layers: Vec<Layer<F>>,
}

impl<F: Scalar> Network<F> {
    pub fn new(layers: Vec<Layer<F>>) -> Self {
        Self { layers }
    }

    /// Forward pass up to the logits (no softmax).
    pub fn forward_logits(
        &mut self,
        x: &Tensor<F>,
        training: bool,
        rng: &mut ChaCha20Rng,
    ) -> crate::Result<Tensor<F>> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, training, rng)?;
        }
        Ok(cur)
    }

    /// Inference: class probabilities, rows summing to 1.
    pub fn predict(&mut self, x: &Tensor<F>, rng: &mut ChaCha20Rng) -> crate::Result<Tensor<F>> {
        let logits = self.forward_logits(x, false, rng)?;
        Ok(softmax_rows(&logits))
    }

    /// Backpropagate the mean cross-entropy gradient from cached
    /// activations of the last (training) forward pass.
    pub fn backward(&mut self, probs: &Tensor<F>, labels: &[usize]) -> crate::Result<()> {
        let batch = probs.batch();
        let classes = probs.shape[1];
        let inv_b = F::from_f64(1.0 / batch as f64);
        let mut grad = probs.clone();
        for (i, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(crate::Error::LabelOutOfRange { label, classes });
            }
            grad.data[i * classes + label] -= F::one();
        }
        for g in &mut grad.data {
            *g *= inv_b;
        }
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            layer.zero_grads();
        }
    }

    /// Trainable parameter count.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        for layer in &self.layers {
            layer.visit_params(&mut |p, _| n += p.len());
        }
        n
    }

    /// Snapshot of all parameters and persistent state (running stats).
    pub fn snapshot(&self) -> Vec<Vec<F>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for t in layer.state_tensors() {
                out.push(t.data.clone());
            }
        }
        out
    }

    pub fn restore(&mut self, snap: &[Vec<F>]) {
        let mut it = snap.iter();
        for layer in &mut self.layers {
            for t in layer.state_tensors_mut() {
                t.data.copy_from_slice(it.next().expect("snapshot layout matches"));
            }
        }
    }
}
