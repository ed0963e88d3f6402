//! Deterministic training loop with early stopping on validation accuracy.

use super::loss::{accuracy, softmax_rows, sparse_ce_from_logits};
use super::{Network, Optimizer, OptimizerKind, Scalar, Tensor};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Usage("learning_rate must be positive".into()));
        }
        if self.patience < 1 {
            return Err(Error::Usage("patience must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Usage("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labeled samples with a shared per-sample shape.
pub struct ClassDataset<F: Scalar> {
    /// Shape of one sample (without the batch dimension).
    pub sample_shape: Vec<usize>,
    /// Flattened samples, `sample_len` values each.
    pub data: Vec<F>,
    pub labels: Vec<usize>,
}

impl<F: Scalar> ClassDataset<F> {
    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Batch tensor of the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Tensor<F> {
        let sl = self.sample_len();
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        let mut data = Vec::with_capacity(indices.len() * sl);
        for &i in indices {
            data.extend_from_slice(&self.data[i * sl..(i + 1) * sl]);
        }
        Tensor::from_vec(&shape, data)
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Evaluate mean loss and accuracy over a dataset in inference mode.
pub fn evaluate<F: Scalar>(
    net: &mut Network<F>,
    set: &ClassDataset<F>,
    batch_size: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(f64, f64)> {
    let n = set.len();
    let mut loss_sum = 0.0;
    let mut correct = 0.0;
    let mut i = 0;
    while i < n {
        let hi = (i + batch_size).min(n);
        let idx: Vec<usize> = (i..hi).collect();
        let x = set.batch(&idx);
        let labels = set.batch_labels(&idx);
        let logits = net.forward_logits(&x, false, rng)?;
        loss_sum += sparse_ce_from_logits(&logits, &labels)? * idx.len() as f64;
        let probs = softmax_rows(&logits);
        correct += accuracy(&probs, &labels) * idx.len() as f64;
        i = hi;
    }
    Ok((loss_sum / n as f64, correct / n as f64))
}

/// Early-stopping counter: strict improvement in the monitored value
/// resets, `patience` consecutive non-improving epochs stop.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    without_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            without_improvement: 0,
        }
    }

    /// Record one epoch; returns (improved, should_stop).
    pub fn update(&mut self, epoch: usize, value: f64) -> (bool, bool) {
        if value > self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.without_improvement = 0;
            (true, false)
        } else {
            self.without_improvement += 1;
            (false, self.without_improvement >= self.patience)
        }
    }
}

/// Train with per-epoch seeded shuffling; stop when `patience` consecutive
/// epochs bring no strict improvement in validation accuracy, then restore
/// the best-epoch parameters.
pub fn train<F: Scalar>(
    net: &mut Network<F>,
    train_set: &ClassDataset<F>,
    val_set: &ClassDataset<F>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit("validation".into()));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate);
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    let mut report = TrainReport {
        epochs: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
    };
    let mut best_params: Option<Vec<Vec<F>>> = None;
    let mut stopper = EarlyStopping::new(cfg.patience);

    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut acc_sum = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let x = train_set.batch(chunk);
            let labels = train_set.batch_labels(chunk);
            let logits = net.forward_logits(&x, true, &mut rng)?;
            let loss = sparse_ce_from_logits(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            let probs = softmax_rows(&logits);
            loss_sum += loss * chunk.len() as f64;
            acc_sum += accuracy(&probs, &labels) * chunk.len() as f64;
            net.zero_grads();
            net.backward(&probs, &labels)?;
            opt.step(net);
        }
        let (val_loss, val_acc) = evaluate(net, val_set, cfg.batch_size, &mut rng)?;
        report.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: acc_sum / train_set.len() as f64,
            val_loss,
            val_accuracy: val_acc,
        });
        report.stopped_epoch = epoch;

        let (improved, stop) = stopper.update(epoch, val_acc);
        if improved {
            report.best_val_accuracy = val_acc;
            report.best_epoch = epoch;
            best_params = Some(net.snapshot());
        }
        if stop {
            break;
        }
    }
    if let Some(best) = best_params {
        net.restore(&best);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, Init, Layer};
    use rand::Rng;

    fn blob_dataset(seed: u64, n_per_class: usize) -> ClassDataset<f64> {
        // two linearly separable 2-D blobs
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * n_per_class {
            let class = i % 2;
            let cx = if class == 0 { -2.0 } else { 2.0 };
            data.push(cx + rng.gen_range(-1.0..1.0));
            data.push(rng.gen_range(-1.0..1.0));
            labels.push(class);
        }
        ClassDataset {
            sample_shape: vec![2],
            data,
            labels,
        }
    }

    fn blob_net(seed: u64) -> Network<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Network::new(vec![
            Layer::Dense(Dense::new(&mut rng, 2, 16, Init::He)),
            Layer::Relu(crate::nn::Relu::new()),
            Layer::Dense(Dense::new(&mut rng, 16, 2, Init::Glorot)),
        ])
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 16,
            patience: 50,
            seed: 3,
        }
    }

    #[test]
    fn separable_blobs_reach_full_train_accuracy() {
        let train_set = blob_dataset(5, 100);
        let val_set = blob_dataset(6, 20);
        let mut net = blob_net(7);
        let report = train(&mut net, &train_set, &val_set, &cfg()).unwrap();
        let last = report.epochs.last().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let (_, train_acc) = evaluate(&mut net, &train_set, 16, &mut rng).unwrap();
        assert!(
            train_acc == 1.0 || last.train_accuracy == 1.0,
            "train accuracy {train_acc}"
        );
        assert!(report.stopped_epoch <= 50);
    }

    #[test]
    fn training_is_deterministic_for_fixed_seed() {
        let train_set = blob_dataset(5, 50);
        let val_set = blob_dataset(6, 10);
        let mut net1 = blob_net(7);
        let r1 = train(&mut net1, &train_set, &val_set, &cfg()).unwrap();
        let mut net2 = blob_net(7);
        let r2 = train(&mut net2, &train_set, &val_set, &cfg()).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(net1.snapshot(), net2.snapshot());
    }

    #[test]
    fn early_stopping_counting_rule() {
        // accuracies 0.5, 0.6, 0.6, 0.6, 0.6 with patience 3: stop after
        // epoch 5, best at epoch 2
        let mut stopper = EarlyStopping::new(3);
        let curve = [0.5, 0.6, 0.6, 0.6, 0.6];
        let mut stopped_at = 0;
        for (i, &acc) in curve.iter().enumerate() {
            let (_, stop) = stopper.update(i + 1, acc);
            if stop {
                stopped_at = i + 1;
                break;
            }
        }
        assert_eq!(stopped_at, 5);
        assert_eq!(stopper.best_epoch, 2);
    }

    #[test]
    fn empty_split_errors() {
        let train_set = blob_dataset(5, 10);
        let empty = ClassDataset::<f64> {
            sample_shape: vec![2],
            data: vec![],
            labels: vec![],
        };
        let mut net = blob_net(7);
        assert!(matches!(
            train(&mut net, &train_set, &empty, &cfg()),
            Err(Error::EmptySplit(_))
        ));
        assert!(matches!(
            train(&mut net, &empty, &train_set, &cfg()),
            Err(Error::EmptySplit(_))
        ));
    }
}
