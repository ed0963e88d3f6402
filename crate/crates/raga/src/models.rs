//! Declarative builders for the four classifier architectures and their
//! training defaults.

use crate::nn::{Init, Layer, Network, OptimizerKind, Scalar, TrainConfig};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Cnn1d,
    Lstm,
    Ann,
    Cnn2d,
}

impl ModelName {
    pub const ALL: [ModelName; 4] = [ModelName::Cnn1d, ModelName::Lstm, ModelName::Ann, ModelName::Cnn2d];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Cnn1d => "cnn1d",
            ModelName::Lstm => "lstm",
            ModelName::Ann => "ann",
            ModelName::Cnn2d => "cnn2d",
        }
    }

    /// Whether this model consumes the 30-feature vectors (vs. images).
    pub fn uses_features(self) -> bool {
        !matches!(self, ModelName::Cnn2d)
    }
}

impl std::str::FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn1d" => Ok(ModelName::Cnn1d),
            "lstm" => Ok(ModelName::Lstm),
            "ann" => Ok(ModelName::Ann),
            "cnn2d" => Ok(ModelName::Cnn2d),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

/// One layer in a declarative model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize },
    Conv2d { filters: usize, kernel: usize },
    Dense { units: usize },
    Relu,
    BatchNorm,
    MaxPool2d { pool: usize },
    Flatten,
    Lstm { units: usize, dropout: f64, recurrent_dropout: f64 },
    Dropout { rate: f64 },
    Softmax,
}

/// Declarative layer stack plus training defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: ModelName,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub train_defaults: TrainConfig,
}

/// Build the named architecture.
pub fn build(name: ModelName) -> ModelSpec {
    use LayerSpec::*;
    match name {
        ModelName::Cnn1d => {
            let mut layers = Vec::new();
            for filters in [128usize, 256, 512] {
                layers.push(Conv1d { filters, kernel: 3 });
                layers.push(Relu);
                layers.push(BatchNorm);
            }
            layers.push(Flatten);
            for units in [512usize, 256, 128, 64] {
                layers.push(Dense { units });
                layers.push(Relu);
                layers.push(BatchNorm);
            }
            layers.push(Dense { units: NUM_CLASSES });
            layers.push(Softmax);
            ModelSpec {
                name,
                input_shape: vec![1, 30],
                layers,
                train_defaults: TrainConfig {
                    optimizer: OptimizerKind::Adam,
                    learning_rate: 0.001,
                    epochs: 50,
                    batch_size: 32,
                    patience: 3,
                    seed: 0,
                },
            }
        }
        ModelName::Lstm => ModelSpec {
            name,
            input_shape: vec![1, 30],
            layers: vec![
                Lstm { units: 128, dropout: 0.05, recurrent_dropout: 0.25 },
                Lstm { units: 64, dropout: 0.0, recurrent_dropout: 0.0 },
                Flatten,
                Dense { units: NUM_CLASSES },
                Softmax,
            ],
            train_defaults: TrainConfig {
                optimizer: OptimizerKind::Adam,
                learning_rate: 0.0009,
                epochs: 100,
                batch_size: 32,
                patience: 5,
                seed: 0,
            },
        },
        ModelName::Ann => {
            let mut layers = vec![Flatten];
            for units in [512usize, 256, 128, 64] {
                layers.push(Dense { units });
                layers.push(Relu);
            }
            layers.push(Dense { units: NUM_CLASSES });
            layers.push(Softmax);
            ModelSpec {
                name,
                input_shape: vec![1, 30],
                layers,
                train_defaults: TrainConfig {
                    optimizer: OptimizerKind::Adam,
                    learning_rate: 0.001,
                    epochs: 50,
                    batch_size: 32,
                    patience: 3,
                    seed: 0,
                },
            }
        }
        ModelName::Cnn2d => {
            let mut layers = Vec::new();
            for filters in [64usize, 128, 256] {
                layers.push(Conv2d { filters, kernel: 3 });
                layers.push(Relu);
                layers.push(BatchNorm);
                layers.push(MaxPool2d { pool: 2 });
                layers.push(BatchNorm);
            }
            layers.push(Flatten);
            for units in [256usize, 128, 64] {
                layers.push(Dense { units });
                layers.push(Relu);
            }
            layers.push(Dense { units: NUM_CLASSES });
            layers.push(Softmax);
            ModelSpec {
                name,
                input_shape: vec![256, 256, 3],
                layers,
                train_defaults: TrainConfig {
                    optimizer: OptimizerKind::Rmsprop,
                    learning_rate: 0.001,
                    epochs: 30,
                    batch_size: 16,
                    patience: 3,
                    seed: 0,
                },
            }
        }
    }
}

/// Shape of one sample after each layer, with shape validation.
fn output_shape(shape: &[usize], layer: &LayerSpec) -> Result<Vec<usize>> {
    use LayerSpec::*;
    let err = |msg: String| Err(Error::ShapeMismatch(msg));
    Ok(match layer {
        Conv1d { filters, .. } => {
            if shape.len() != 2 {
                return err(format!("conv1d needs (L, C), got {shape:?}"));
            }
            vec![shape[0], *filters]
        }
        Conv2d { filters, .. } => {
            if shape.len() != 3 {
                return err(format!("conv2d needs (H, W, C), got {shape:?}"));
            }
            vec![shape[0], shape[1], *filters]
        }
        MaxPool2d { pool } => {
            if shape.len() != 3 {
                return err(format!("maxpool2d needs (H, W, C), got {shape:?}"));
            }
            vec![shape[0] / pool, shape[1] / pool, shape[2]]
        }
        Dense { units } => {
            if shape.len() != 1 {
                return err(format!("dense needs flat input, got {shape:?}"));
            }
            vec![*units]
        }
        Lstm { units, .. } => {
            if shape.len() != 2 {
                return err(format!("lstm needs (T, F), got {shape:?}"));
            }
            vec![shape[0], *units]
        }
        Flatten => vec![shape.iter().product()],
        Relu | BatchNorm | Dropout { .. } | Softmax => shape.to_vec(),
    })
}

/// Exact trainable-parameter total of a spec.
pub fn param_count(spec: &ModelSpec) -> usize {
    let mut shape = spec.input_shape.clone();
    let mut total = 0;
    for layer in &spec.layers {
        use LayerSpec::*;
        total += match layer {
            Conv1d { filters, kernel } => kernel * shape[1] * filters + filters,
            Conv2d { filters, kernel } => kernel * kernel * shape[2] * filters + filters,
            Dense { units } => shape[0] * units + units,
            Lstm { units, .. } => {
                let f = shape[1];
                4 * units * (f + units) + 4 * units
            }
            BatchNorm => 2 * shape.last().unwrap(),
            _ => 0,
        };
        shape = output_shape(&shape, layer).expect("built specs are shape-consistent");
    }
    total
}

/// Instantiate a spec as a runnable network with seeded initial weights.
/// He-normal feeds the ReLU stacks; Glorot-uniform covers the LSTM and the
/// softmax-facing dense layer.
pub fn instantiate<F: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Network<F>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut shape = spec.input_shape.clone();
    let mut layers: Vec<Layer<F>> = Vec::new();
    for (i, ls) in spec.layers.iter().enumerate() {
        use LayerSpec::*;
        match ls {
            Conv1d { filters, kernel } => {
                layers.push(Layer::Conv1d(crate::nn::Conv1d::new(&mut rng, shape[1], *filters, *kernel)));
            }
            Conv2d { filters, kernel } => {
                layers.push(Layer::Conv2d(crate::nn::Conv2d::new(&mut rng, shape[2], *filters, *kernel)));
            }
            Dense { units } => {
                // the final dense feeds softmax; everything else feeds ReLU
                let init = if i + 2 >= spec.layers.len() { Init::Glorot } else { Init::He };
                layers.push(Layer::Dense(crate::nn::Dense::new(&mut rng, shape[0], *units, init)));
            }
            Relu => layers.push(Layer::Relu(crate::nn::Relu::new())),
            BatchNorm => layers.push(Layer::BatchNorm(crate::nn::BatchNorm::new(*shape.last().unwrap()))),
            MaxPool2d { pool } => layers.push(Layer::MaxPool2d(crate::nn::MaxPool2d::new(*pool))),
            Flatten => layers.push(Layer::Flatten(crate::nn::Flatten::new())),
            Lstm { units, dropout, recurrent_dropout } => {
                layers.push(Layer::Lstm(crate::nn::Lstm::new(
                    &mut rng,
                    shape[1],
                    *units,
                    *dropout,
                    *recurrent_dropout,
                )));
            }
            Dropout { rate } => layers.push(Layer::Dropout(crate::nn::Dropout::new(*rate))),
            Softmax => {} // applied by the loss/prediction path
        }
        shape = output_shape(&shape, ls)?;
    }
    Ok(Network::new(layers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn ann_widths_read_back() {
        let spec = build(ModelName::Ann);
        let widths: Vec<usize> = spec
            .layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dense { units } => Some(*units),
                _ => None,
            })
            .collect();
        assert_eq!(widths, vec![512, 256, 128, 64, 10]);
    }

    #[test]
    fn every_model_ends_in_softmax_over_ten_classes() {
        for name in ModelName::ALL {
            let spec = build(name);
            assert_eq!(spec.layers.last(), Some(&LayerSpec::Softmax));
            let last_dense = spec
                .layers
                .iter()
                .rev()
                .find_map(|l| match l {
                    LayerSpec::Dense { units } => Some(*units),
                    _ => None,
                })
                .unwrap();
            assert_eq!(last_dense, NUM_CLASSES);
        }
    }

    #[test]
    fn cnn2d_spatial_dims_after_three_pools() {
        let spec = build(ModelName::Cnn2d);
        let mut shape = spec.input_shape.clone();
        for l in &spec.layers {
            shape = output_shape(&shape, l).unwrap();
            if matches!(l, LayerSpec::Flatten) {
                break;
            }
        }
        // flatten input was 32x32x256
        assert_eq!(shape, vec![32 * 32 * 256]);
    }

    #[test]
    fn param_count_formulas() {
        // dense(30 -> 512)
        let spec = ModelSpec {
            name: ModelName::Ann,
            input_shape: vec![30],
            layers: vec![LayerSpec::Dense { units: 512 }],
            train_defaults: build(ModelName::Ann).train_defaults,
        };
        assert_eq!(param_count(&spec), 30 * 512 + 512);

        // conv1d(128 filters, k3, 1 channel)
        let spec = ModelSpec {
            name: ModelName::Cnn1d,
            input_shape: vec![1, 1],
            layers: vec![LayerSpec::Conv1d { filters: 128, kernel: 3 }],
            train_defaults: build(ModelName::Cnn1d).train_defaults,
        };
        assert_eq!(param_count(&spec), 3 * 128 + 128);
    }

    #[test]
    fn param_count_matches_instantiated_network() {
        for name in [ModelName::Cnn1d, ModelName::Lstm, ModelName::Ann] {
            let spec = build(name);
            let net = instantiate::<f32>(&spec, 1).unwrap();
            assert_eq!(net.param_count(), param_count(&spec), "{name:?}");
        }
    }

    #[test]
    fn feature_models_forward_their_declared_input() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        for name in [ModelName::Cnn1d, ModelName::Lstm, ModelName::Ann] {
            let spec = build(name);
            let mut net = instantiate::<f64>(&spec, 7).unwrap();
            let x = Tensor::from_vec(&[4, 1, 30], vec![0.1; 4 * 30]);
            let probs = net.predict(&x, &mut rng).unwrap();
            assert_eq!(probs.shape, vec![4, 10]);
            for row in probs.data.chunks(10) {
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rebuilding_with_same_seed_gives_identical_parameters() {
        let spec = build(ModelName::Cnn1d);
        let a = instantiate::<f32>(&spec, 5).unwrap();
        let b = instantiate::<f32>(&spec, 5).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
    }

    #[test]
    fn unknown_model_name_rejected() {
        assert!(matches!(
            "resnet".parse::<ModelName>(),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn zero_weight_dense_softmax_is_uniform() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0);
        let spec = build(ModelName::Ann);
        let mut net = instantiate::<f64>(&spec, 3).unwrap();
        // zero every parameter: logits collapse to 0, softmax to uniform
        let zeros: Vec<Vec<f64>> = net.snapshot().iter().map(|t| vec![0.0; t.len()]).collect();
        net.restore(&zeros);
        // restore broke batchnorm running var (none in ann), fine here
        let x = Tensor::from_vec(&[1, 1, 30], vec![0.5; 30]);
        let probs = net.predict(&x, &mut rng).unwrap();
        for &p in &probs.data {
            assert!((p - 0.1).abs() < 1e-9);
        }
    }
}
