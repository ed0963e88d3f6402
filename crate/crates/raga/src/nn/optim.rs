//! Adam and RMSprop with per-tensor state, matching the update rules the
//! model defaults expect (beta1 0.9, beta2 0.999, rho 0.9, eps 1e-7).

use super::{Network, Scalar};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const RMSPROP_RHO: f64 = 0.9;
const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

pub struct Optimizer<F: Scalar> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    step: u64,
    // first/second moment per parameter tensor, in traversal order
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Optimizer<F> {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        assert!(learning_rate > 0.0);
        Self {
            kind,
            learning_rate,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update over every trainable tensor of the network, from the
    /// gradients accumulated by the last backward pass.
    pub fn step(&mut self, net: &mut Network<F>) {
        self.step += 1;
        let t = self.step;
        let kind = self.kind;
        let lr = F::from_f64(self.learning_rate);
        let eps = F::from_f64(EPS);
        let b1 = F::from_f64(ADAM_BETA1);
        let b2 = F::from_f64(ADAM_BETA2);
        let rho = F::from_f64(RMSPROP_RHO);
        let bias1 = F::from_f64(1.0 - ADAM_BETA1.powi(t as i32));
        let bias2 = F::from_f64(1.0 - ADAM_BETA2.powi(t as i32));

        let mut idx = 0;
        let m_state = &mut self.m;
        let v_state = &mut self.v;
        for layer in &mut net.layers {
            layer.update_params(&mut |param, grad| {
                if idx == m_state.len() {
                    m_state.push(vec![F::zero(); param.len()]);
                    v_state.push(vec![F::zero(); param.len()]);
                }
                let m = &mut m_state[idx];
                let v = &mut v_state[idx];
                match kind {
                    OptimizerKind::Adam => {
                        for i in 0..param.len() {
                            let g = grad[i];
                            m[i] = b1 * m[i] + (F::one() - b1) * g;
                            v[i] = b2 * v[i] + (F::one() - b2) * g * g;
                            let mhat = m[i] / bias1;
                            let vhat = v[i] / bias2;
                            param[i] -= lr * mhat / (vhat.sqrt() + eps);
                        }
                    }
                    OptimizerKind::Rmsprop => {
                        for i in 0..param.len() {
                            let g = grad[i];
                            v[i] = rho * v[i] + (F::one() - rho) * g * g;
                            param[i] -= lr * g / (v[i].sqrt() + eps);
                        }
                    }
                }
                idx += 1;
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Dense, Init, Layer, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Minimize f(w) = ||w||^2 directly through the optimizer by feeding
    /// grad = 2w via a rank-one forward/backward pair (x = 2w, dy = 1 gives
    /// dW = x^T dy = 2w).
    fn quadratic_descent(kind: OptimizerKind, lr: f64, steps: usize) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut net =
            crate::nn::Network::new(vec![Layer::Dense(Dense::<f64>::new(&mut rng, 2, 1, Init::Glorot))]);
        if let Layer::Dense(d) = &mut net.layers[0] {
            d.w.data = vec![1.0, 1.0];
            d.b.data = vec![0.0];
        }
        let mut opt = Optimizer::new(kind, lr);
        for _ in 0..steps {
            let w = if let Layer::Dense(d) = &net.layers[0] {
                d.w.data.clone()
            } else {
                unreachable!()
            };
            net.zero_grads();
            let x = Tensor::from_vec(&[1, 2], vec![2.0 * w[0], 2.0 * w[1]]);
            net.layers[0].forward(&x, false, &mut rng).unwrap();
            net.layers[0]
                .backward(&Tensor::from_vec(&[1, 1], vec![1.0]))
                .unwrap();
            // the bias also accumulates gradient 1; zero it so only w moves
            if let Layer::Dense(d) = &mut net.layers[0] {
                d.b.data = vec![0.0];
            }
            opt.step(&mut net);
            if let Layer::Dense(d) = &mut net.layers[0] {
                d.b.data = vec![0.0];
            }
        }
        if let Layer::Dense(d) = &net.layers[0] {
            (d.w.data[0].powi(2) + d.w.data[1].powi(2)).sqrt()
        } else {
            unreachable!()
        }
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let norm = quadratic_descent(OptimizerKind::Adam, 0.01, 200);
        assert!(norm < 0.1, "||w|| = {norm}");
    }

    #[test]
    fn rmsprop_converges_on_quadratic() {
        let norm = quadratic_descent(OptimizerKind::Rmsprop, 0.01, 300);
        assert!(norm < 0.1, "||w|| = {norm}");
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut net =
            crate::nn::Network::new(vec![Layer::Dense(Dense::<f64>::new(&mut rng, 3, 2, Init::He))]);
        let before = net.snapshot();
        net.zero_grads();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1);
        for _ in 0..10 {
            opt.step(&mut net);
        }
        assert_eq!(net.snapshot(), before);
    }

    #[test]
    fn first_adam_step_is_lr_times_sign() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut net =
            crate::nn::Network::new(vec![Layer::Dense(Dense::<f64>::new(&mut rng, 1, 2, Init::He))]);
        let w0 = if let Layer::Dense(d) = &net.layers[0] {
            d.w.data.clone()
        } else {
            unreachable!()
        };
        net.zero_grads();
        net.layers[0]
            .forward(&Tensor::from_vec(&[1, 1], vec![1.0]), false, &mut rng)
            .unwrap();
        net.layers[0]
            .backward(&Tensor::from_vec(&[1, 2], vec![0.3, -0.7]))
            .unwrap();
        let lr = 0.05;
        let mut opt = Optimizer::new(OptimizerKind::Adam, lr);
        opt.step(&mut net);
        if let Layer::Dense(d) = &net.layers[0] {
            // bias-corrected first step: lr * g / (|g| + eps') ~ lr * sign(g)
            assert!((d.w.data[0] - (w0[0] - lr)).abs() < 1e-4);
            assert!((d.w.data[1] - (w0[1] + lr)).abs() < 1e-4);
        }
    }
}
