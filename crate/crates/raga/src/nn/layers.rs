//! Layer vocabulary with hand-derived backpropagation. Every layer caches
//! what its backward pass needs during forward.

use super::matmul::{matmul, matmul_a_bt, matmul_at_b, transpose};
use super::{Scalar, Tensor};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub const BN_EPS: f64 = 1e-6;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense = 1,
    Conv1d = 2,
    Conv2d = 3,
    MaxPool2d = 4,
    Flatten = 5,
    BatchNorm = 6,
    Lstm = 7,
    Dropout = 8,
    Relu = 9,
}

impl LayerKind {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            1 => Self::Dense,
            2 => Self::Conv1d,
            3 => Self::Conv2d,
            4 => Self::MaxPool2d,
            5 => Self::Flatten,
            6 => Self::BatchNorm,
            7 => Self::Lstm,
            8 => Self::Dropout,
            9 => Self::Relu,
            _ => return None,
        })
    }
}

/// Standard-normal draw via Box-Muller, deterministic from the stream.
fn randn(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn he_normal<F: Scalar>(rng: &mut ChaCha20Rng, fan_in: usize, n: usize) -> Vec<F> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..n).map(|_| F::from_f64(randn(rng) * std)).collect()
}

fn glorot_uniform<F: Scalar>(rng: &mut ChaCha20Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| F::from_f64(rng.gen_range(-limit..limit))).collect()
}

/// Weight initialization family, chosen per layer by the model builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// He normal; for layers feeding ReLU.
    He,
    /// Glorot uniform; for LSTM and softmax-facing dense layers.
    Glorot,
}

pub enum Layer<F: Scalar> {
    Dense(Dense<F>),
    Conv1d(Conv1d<F>),
    Conv2d(Conv2d<F>),
    MaxPool2d(MaxPool2d<F>),
    Flatten(Flatten<F>),
    BatchNorm(BatchNorm<F>),
    Lstm(Lstm<F>),
    Dropout(Dropout<F>),
    Relu(Relu<F>),
}

impl<F: Scalar> Layer<F> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Conv1d(_) => LayerKind::Conv1d,
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::MaxPool2d(_) => LayerKind::MaxPool2d,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::BatchNorm(_) => LayerKind::BatchNorm,
            Layer::Lstm(_) => LayerKind::Lstm,
            Layer::Dropout(_) => LayerKind::Dropout,
            Layer::Relu(_) => LayerKind::Relu,
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, training: bool, rng: &mut ChaCha20Rng) -> Result<Tensor<F>> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv1d(l) => l.forward(x),
            Layer::Conv2d(l) => l.forward(x),
            Layer::MaxPool2d(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, training),
            Layer::Lstm(l) => l.forward(x, training, rng),
            Layer::Dropout(l) => l.forward(x, training, rng),
            Layer::Relu(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        match self {
            Layer::Dense(l) => l.backward(dy),
            Layer::Conv1d(l) => l.backward(dy),
            Layer::Conv2d(l) => l.backward(dy),
            Layer::MaxPool2d(l) => l.backward(dy),
            Layer::Flatten(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Lstm(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_grads_mut(&mut |g| g.iter_mut().for_each(|v| *v = F::zero()));
    }

    /// Visit (param, grad) slices of every trainable tensor, in a fixed
    /// order.
    pub fn visit_params(&self, f: &mut dyn FnMut(&[F], &[F])) {
        match self {
            Layer::Dense(l) => {
                f(&l.w.data, &l.gw.data);
                f(&l.b.data, &l.gb.data);
            }
            Layer::Conv1d(l) => {
                f(&l.w.data, &l.gw.data);
                f(&l.b.data, &l.gb.data);
            }
            Layer::Conv2d(l) => {
                f(&l.w.data, &l.gw.data);
                f(&l.b.data, &l.gb.data);
            }
            Layer::BatchNorm(l) => {
                f(&l.gamma.data, &l.g_gamma.data);
                f(&l.beta.data, &l.g_beta.data);
            }
            Layer::Lstm(l) => {
                f(&l.wx.data, &l.gwx.data);
                f(&l.wh.data, &l.gwh.data);
                f(&l.b.data, &l.gb.data);
            }
            _ => {}
        }
    }

    /// Visit (param_mut, grad) pairs for the optimizer, same order as
    /// [`Layer::visit_params`].
    pub fn update_params(&mut self, f: &mut dyn FnMut(&mut [F], &[F])) {
        match self {
            Layer::Dense(l) => {
                f(&mut l.w.data, &l.gw.data);
                f(&mut l.b.data, &l.gb.data);
            }
            Layer::Conv1d(l) => {
                f(&mut l.w.data, &l.gw.data);
                f(&mut l.b.data, &l.gb.data);
            }
            Layer::Conv2d(l) => {
                f(&mut l.w.data, &l.gw.data);
                f(&mut l.b.data, &l.gb.data);
            }
            Layer::BatchNorm(l) => {
                f(&mut l.gamma.data, &l.g_gamma.data);
                f(&mut l.beta.data, &l.g_beta.data);
            }
            Layer::Lstm(l) => {
                f(&mut l.wx.data, &l.gwx.data);
                f(&mut l.wh.data, &l.gwh.data);
                f(&mut l.b.data, &l.gb.data);
            }
            _ => {}
        }
    }

    fn visit_grads_mut(&mut self, f: &mut dyn FnMut(&mut [F])) {
        match self {
            Layer::Dense(l) => {
                f(&mut l.gw.data);
                f(&mut l.gb.data);
            }
            Layer::Conv1d(l) => {
                f(&mut l.gw.data);
                f(&mut l.gb.data);
            }
            Layer::Conv2d(l) => {
                f(&mut l.gw.data);
                f(&mut l.gb.data);
            }
            Layer::BatchNorm(l) => {
                f(&mut l.g_gamma.data);
                f(&mut l.g_beta.data);
            }
            Layer::Lstm(l) => {
                f(&mut l.gwx.data);
                f(&mut l.gwh.data);
                f(&mut l.gb.data);
            }
            _ => {}
        }
    }

    /// Persistent tensors for weight files and snapshots: trainable params
    /// plus batch-norm running statistics.
    pub fn state_tensors(&self) -> Vec<&Tensor<F>> {
        match self {
            Layer::Dense(l) => vec![&l.w, &l.b],
            Layer::Conv1d(l) => vec![&l.w, &l.b],
            Layer::Conv2d(l) => vec![&l.w, &l.b],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta, &l.running_mean, &l.running_var],
            Layer::Lstm(l) => vec![&l.wx, &l.wh, &l.b],
            _ => vec![],
        }
    }

    pub fn state_tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        match self {
            Layer::Dense(l) => vec![&mut l.w, &mut l.b],
            Layer::Conv1d(l) => vec![&mut l.w, &mut l.b],
            Layer::Conv2d(l) => vec![&mut l.w, &mut l.b],
            Layer::BatchNorm(l) => vec![
                &mut l.gamma,
                &mut l.beta,
                &mut l.running_mean,
                &mut l.running_var,
            ],
            Layer::Lstm(l) => vec![&mut l.wx, &mut l.wh, &mut l.b],
            _ => vec![],
        }
    }
}

fn shape_err(expect: &str, got: &[usize]) -> Error {
    Error::ShapeMismatch(format!("expected {expect}, got {got:?}"))
}

// ---------------------------------------------------------------- dense

pub struct Dense<F: Scalar> {
    pub in_features: usize,
    pub out_features: usize,
    pub w: Tensor<F>, // (in, out)
    pub b: Tensor<F>,
    gw: Tensor<F>,
    gb: Tensor<F>,
    cache_x: Tensor<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(rng: &mut ChaCha20Rng, in_features: usize, out_features: usize, init: Init) -> Self {
        let n = in_features * out_features;
        let w = match init {
            Init::He => he_normal(rng, in_features, n),
            Init::Glorot => glorot_uniform(rng, in_features, out_features, n),
        };
        Self {
            in_features,
            out_features,
            w: Tensor::from_vec(&[in_features, out_features], w),
            b: Tensor::zeros(&[out_features]),
            gw: Tensor::zeros(&[in_features, out_features]),
            gb: Tensor::zeros(&[out_features]),
            cache_x: Tensor::zeros(&[0]),
        }
    }

    fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        if x.shape.len() != 2 || x.shape[1] != self.in_features {
            return Err(shape_err(&format!("(B, {})", self.in_features), &x.shape));
        }
        let b = x.batch();
        let mut y = Tensor::zeros(&[b, self.out_features]);
        for (row, chunk) in y.data.chunks_mut(self.out_features).enumerate() {
            chunk.copy_from_slice(&self.b.data);
            let _ = row;
        }
        matmul(&x.data, &self.w.data, &mut y.data, b, self.in_features, self.out_features);
        self.cache_x = x.clone();
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let b = dy.batch();
        let x = &self.cache_x;
        matmul_at_b(&x.data, &dy.data, &mut self.gw.data, b, self.in_features, self.out_features);
        for row in dy.data.chunks(self.out_features) {
            for (g, &d) in self.gb.data.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = Tensor::zeros(&[b, self.in_features]);
        matmul_a_bt(&dy.data, &self.w.data, &mut dx.data, b, self.out_features, self.in_features);
        Ok(dx)
    }
}

// ---------------------------------------------------------------- conv1d

/// 1-D convolution over (B, L, Cin), "same" zero padding, stride 1.
pub struct Conv1d<F: Scalar> {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub w: Tensor<F>, // (kernel * in_channels, filters)
    pub b: Tensor<F>,
    gw: Tensor<F>,
    gb: Tensor<F>,
    cache_x: Tensor<F>,
}

impl<F: Scalar> Conv1d<F> {
    pub fn new(rng: &mut ChaCha20Rng, in_channels: usize, filters: usize, kernel: usize) -> Self {
        assert!(kernel >= 1);
        let fan_in = kernel * in_channels;
        Self {
            in_channels,
            filters,
            kernel,
            w: Tensor::from_vec(&[fan_in, filters], he_normal(rng, fan_in, fan_in * filters)),
            b: Tensor::zeros(&[filters]),
            gw: Tensor::zeros(&[fan_in, filters]),
            gb: Tensor::zeros(&[filters]),
            cache_x: Tensor::zeros(&[0]),
        }
    }

    fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        if x.shape.len() != 3 || x.shape[2] != self.in_channels {
            return Err(shape_err(&format!("(B, L, {})", self.in_channels), &x.shape));
        }
        let (b, len, cin) = (x.shape[0], x.shape[1], x.shape[2]);
        let pad = self.kernel / 2;
        let mut y = Tensor::zeros(&[b, len, self.filters]);
        for bi in 0..b {
            for l in 0..len {
                let out = &mut y.data[(bi * len + l) * self.filters..(bi * len + l + 1) * self.filters];
                out.copy_from_slice(&self.b.data);
                for kk in 0..self.kernel {
                    let src = l as isize + kk as isize - pad as isize;
                    if src < 0 || src as usize >= len {
                        continue;
                    }
                    let xs = &x.data[(bi * len + src as usize) * cin..(bi * len + src as usize + 1) * cin];
                    for (ci, &xv) in xs.iter().enumerate() {
                        let wrow = &self.w.data[(kk * cin + ci) * self.filters..(kk * cin + ci + 1) * self.filters];
                        for (o, &wv) in out.iter_mut().zip(wrow) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
        self.cache_x = x.clone();
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let x = &self.cache_x;
        let (b, len, cin) = (x.shape[0], x.shape[1], x.shape[2]);
        let pad = self.kernel / 2;
        let mut dx = Tensor::zeros(&[b, len, cin]);
        for bi in 0..b {
            for l in 0..len {
                let dyrow = &dy.data[(bi * len + l) * self.filters..(bi * len + l + 1) * self.filters];
                for (g, &d) in self.gb.data.iter_mut().zip(dyrow) {
                    *g += d;
                }
                for kk in 0..self.kernel {
                    let src = l as isize + kk as isize - pad as isize;
                    if src < 0 || src as usize >= len {
                        continue;
                    }
                    let s = src as usize;
                    for ci in 0..cin {
                        let xv = x.data[(bi * len + s) * cin + ci];
                        let wrow = &self.w.data[(kk * cin + ci) * self.filters..(kk * cin + ci + 1) * self.filters];
                        let gwrow = &mut self.gw.data[(kk * cin + ci) * self.filters..(kk * cin + ci + 1) * self.filters];
                        let mut acc = F::zero();
                        for ((gw, &wv), &d) in gwrow.iter_mut().zip(wrow).zip(dyrow) {
                            *gw += xv * d;
                            acc += wv * d;
                        }
                        dx.data[(bi * len + s) * cin + ci] += acc;
                    }
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- conv2d

/// 2-D convolution over (B, H, W, Cin), "same" zero padding, stride 1,
/// square kernel. Forward and backward go through im2col so the hot loop
/// is a matrix product.
pub struct Conv2d<F: Scalar> {
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub w: Tensor<F>, // (kernel*kernel*in_channels, filters)
    pub b: Tensor<F>,
    gw: Tensor<F>,
    gb: Tensor<F>,
    cache_x: Tensor<F>,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(rng: &mut ChaCha20Rng, in_channels: usize, filters: usize, kernel: usize) -> Self {
        assert!(kernel >= 1);
        let fan_in = kernel * kernel * in_channels;
        Self {
            in_channels,
            filters,
            kernel,
            w: Tensor::from_vec(&[fan_in, filters], he_normal(rng, fan_in, fan_in * filters)),
            b: Tensor::zeros(&[filters]),
            gw: Tensor::zeros(&[fan_in, filters]),
            gb: Tensor::zeros(&[filters]),
            cache_x: Tensor::zeros(&[0]),
        }
    }

    fn im2col(&self, x: &Tensor<F>, bi: usize, cols: &mut [F]) {
        let (h, w, cin) = (x.shape[1], x.shape[2], x.shape[3]);
        let k = self.kernel;
        let pad = k / 2;
        let kkc = k * k * cin;
        cols.iter_mut().for_each(|v| *v = F::zero());
        let base = bi * h * w * cin;
        for y in 0..h {
            for xx in 0..w {
                let dst = (y * w + xx) * kkc;
                for ky in 0..k {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy as usize >= h {
                        continue;
                    }
                    for kx in 0..k {
                        let sx = xx as isize + kx as isize - pad as isize;
                        if sx < 0 || sx as usize >= w {
                            continue;
                        }
                        let src = base + ((sy as usize) * w + sx as usize) * cin;
                        let d = dst + (ky * k + kx) * cin;
                        cols[d..d + cin].copy_from_slice(&x.data[src..src + cin]);
                    }
                }
            }
        }
    }

    fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        if x.shape.len() != 4 || x.shape[3] != self.in_channels {
            return Err(shape_err(&format!("(B, H, W, {})", self.in_channels), &x.shape));
        }
        let (b, h, w) = (x.shape[0], x.shape[1], x.shape[2]);
        let hw = h * w;
        let kkc = self.kernel * self.kernel * self.in_channels;
        let mut y = Tensor::zeros(&[b, h, w, self.filters]);
        let mut cols = vec![F::zero(); hw * kkc];
        for bi in 0..b {
            self.im2col(x, bi, &mut cols);
            let out = &mut y.data[bi * hw * self.filters..(bi + 1) * hw * self.filters];
            for chunk in out.chunks_mut(self.filters) {
                chunk.copy_from_slice(&self.b.data);
            }
            matmul(&cols, &self.w.data, out, hw, kkc, self.filters);
        }
        self.cache_x = x.clone();
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let x = &self.cache_x;
        let (b, h, w, cin) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
        let hw = h * w;
        let k = self.kernel;
        let pad = k / 2;
        let kkc = k * k * cin;
        let mut dx = Tensor::zeros(&[b, h, w, cin]);
        let mut cols = vec![F::zero(); hw * kkc];
        let mut dcols = vec![F::zero(); hw * kkc];
        let wt = transpose(&self.w.data, kkc, self.filters);
        for bi in 0..b {
            let dyb = &dy.data[bi * hw * self.filters..(bi + 1) * hw * self.filters];
            // bias gradient
            for row in dyb.chunks(self.filters) {
                for (g, &d) in self.gb.data.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // weight gradient: cols^T * dy
            self.im2col(x, bi, &mut cols);
            matmul_at_b(&cols, dyb, &mut self.gw.data, hw, kkc, self.filters);
            // input gradient: col2im(dy * w^T)
            dcols.iter_mut().for_each(|v| *v = F::zero());
            matmul(dyb, &wt, &mut dcols, hw, self.filters, kkc);
            let base = bi * hw * cin;
            for y in 0..h {
                for xx in 0..w {
                    let src_row = (y * w + xx) * kkc;
                    for ky in 0..k {
                        let sy = y as isize + ky as isize - pad as isize;
                        if sy < 0 || sy as usize >= h {
                            continue;
                        }
                        for kx in 0..k {
                            let sx = xx as isize + kx as isize - pad as isize;
                            if sx < 0 || sx as usize >= w {
                                continue;
                            }
                            let dst = base + ((sy as usize) * w + sx as usize) * cin;
                            let s = src_row + (ky * k + kx) * cin;
                            for ci in 0..cin {
                                dx.data[dst + ci] += dcols[s + ci];
                            }
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- pooling

/// Max pooling over (B, H, W, C) with a square window equal to the stride;
/// output spatial dims are floor(dim / pool).
pub struct MaxPool2d<F: Scalar> {
    pub pool: usize,
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> MaxPool2d<F> {
    pub fn new(pool: usize) -> Self {
        assert!(pool >= 1);
        Self {
            pool,
            argmax: Vec::new(),
            in_shape: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        if x.shape.len() != 4 {
            return Err(shape_err("(B, H, W, C)", &x.shape));
        }
        let (b, h, w, c) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
        let p = self.pool;
        let (oh, ow) = (h / p, w / p);
        let mut y = Tensor::zeros(&[b, oh, ow, c]);
        self.argmax = vec![0; b * oh * ow * c];
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ci in 0..c {
                        let mut best = F::neg_infinity();
                        let mut best_idx = 0;
                        for py in 0..p {
                            for px in 0..p {
                                let idx = ((bi * h + oy * p + py) * w + ox * p + px) * c + ci;
                                if x.data[idx] > best {
                                    best = x.data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        let oidx = ((bi * oh + oy) * ow + ox) * c + ci;
                        y.data[oidx] = best;
                        self.argmax[oidx] = best_idx;
                    }
                }
            }
        }
        self.in_shape = x.shape.clone();
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let mut dx = Tensor::zeros(&self.in_shape);
        for (o, &src) in self.argmax.iter().enumerate() {
            dx.data[src] += dy.data[o];
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- flatten

pub struct Flatten<F: Scalar> {
    in_shape: Vec<usize>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> Flatten<F> {
    pub fn new() -> Self {
        Self {
            in_shape: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.in_shape = x.shape.clone();
        Ok(Tensor::from_vec(&[x.batch(), x.sample_len()], x.data.clone()))
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        Ok(Tensor::from_vec(&self.in_shape, dy.data.clone()))
    }
}

impl<F: Scalar> Default for Flatten<F> {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------- batchnorm

/// Batch normalization over the last (channel) axis; batch statistics in
/// training, running statistics in inference.
pub struct BatchNorm<F: Scalar> {
    pub channels: usize,
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    g_gamma: Tensor<F>,
    g_beta: Tensor<F>,
    cache_xhat: Tensor<F>,
    cache_inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Tensor::from_vec(&[channels], vec![F::one(); channels]),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::from_vec(&[channels], vec![F::one(); channels]),
            g_gamma: Tensor::zeros(&[channels]),
            g_beta: Tensor::zeros(&[channels]),
            cache_xhat: Tensor::zeros(&[0]),
            cache_inv_std: Vec::new(),
        }
    }

    fn forward(&mut self, x: &Tensor<F>, training: bool) -> Result<Tensor<F>> {
        let c = self.channels;
        if *x.shape.last().unwrap_or(&0) != c {
            return Err(shape_err(&format!("(..., {c})"), &x.shape));
        }
        let rows = x.numel() / c;
        let eps = F::from_f64(BN_EPS);
        let mut y = Tensor::zeros(&x.shape);
        if training {
            let n = F::from_f64(rows as f64);
            let mut mean = vec![F::zero(); c];
            let mut var = vec![F::zero(); c];
            for row in x.data.chunks(c) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            for row in x.data.chunks(c) {
                for ((vv, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                    *vv += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|v| *v /= n);

            let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();
            let mut xhat = Tensor::zeros(&x.shape);
            for (r, row) in x.data.chunks(c).enumerate() {
                for (ci, &v) in row.iter().enumerate() {
                    let xh = (v - mean[ci]) * inv_std[ci];
                    xhat.data[r * c + ci] = xh;
                    y.data[r * c + ci] = self.gamma.data[ci] * xh + self.beta.data[ci];
                }
            }
            let mom = F::from_f64(BN_MOMENTUM);
            for ci in 0..c {
                self.running_mean.data[ci] = mom * self.running_mean.data[ci] + (F::one() - mom) * mean[ci];
                self.running_var.data[ci] = mom * self.running_var.data[ci] + (F::one() - mom) * var[ci];
            }
            self.cache_xhat = xhat;
            self.cache_inv_std = inv_std;
        } else {
            for (r, row) in x.data.chunks(c).enumerate() {
                for (ci, &v) in row.iter().enumerate() {
                    let xh = (v - self.running_mean.data[ci])
                        / (self.running_var.data[ci] + eps).sqrt();
                    y.data[r * c + ci] = self.gamma.data[ci] * xh + self.beta.data[ci];
                }
            }
        }
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let c = self.channels;
        let rows = dy.numel() / c;
        let n = F::from_f64(rows as f64);
        let xhat = &self.cache_xhat;

        let mut sum_dy = vec![F::zero(); c];
        let mut sum_dy_xhat = vec![F::zero(); c];
        for (r, row) in dy.data.chunks(c).enumerate() {
            for (ci, &d) in row.iter().enumerate() {
                sum_dy[ci] += d;
                sum_dy_xhat[ci] += d * xhat.data[r * c + ci];
            }
        }
        for ci in 0..c {
            self.g_gamma.data[ci] += sum_dy_xhat[ci];
            self.g_beta.data[ci] += sum_dy[ci];
        }
        // dx = gamma * inv_std / N * (N*dy - sum_dy - xhat * sum_dy_xhat)
        let mut dx = Tensor::zeros(&dy.shape);
        for (r, row) in dy.data.chunks(c).enumerate() {
            for (ci, &d) in row.iter().enumerate() {
                let g = self.gamma.data[ci] * self.cache_inv_std[ci] / n;
                dx.data[r * c + ci] =
                    g * (n * d - sum_dy[ci] - xhat.data[r * c + ci] * sum_dy_xhat[ci]);
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- lstm

struct LstmStepCache<F> {
    x_masked: Vec<F>,  // (B, in)
    h_masked: Vec<F>,  // (B, units)
    gates: Vec<F>,     // (B, 4*units) post-activation [i f g o]
    c_prev: Vec<F>,    // (B, units)
    tanh_c: Vec<F>,    // (B, units)
    mask_x: Vec<F>,    // (B, in)
    mask_h: Vec<F>,    // (B, units)
}

/// LSTM over (B, T, in) returning the full hidden-state sequence
/// (B, T, units). Standard sigmoid/tanh gate formulation with per-step
/// inverted-dropout masks on inputs and recurrent connections.
pub struct Lstm<F: Scalar> {
    pub in_features: usize,
    pub units: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub wx: Tensor<F>, // (in, 4*units)
    pub wh: Tensor<F>, // (units, 4*units)
    pub b: Tensor<F>,  // (4*units)
    gwx: Tensor<F>,
    gwh: Tensor<F>,
    gb: Tensor<F>,
    steps: Vec<LstmStepCache<F>>,
    cache_batch: usize,
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

impl<F: Scalar> Lstm<F> {
    pub fn new(
        rng: &mut ChaCha20Rng,
        in_features: usize,
        units: usize,
        dropout: f64,
        recurrent_dropout: f64,
    ) -> Self {
        assert!((0.0..1.0).contains(&dropout) && (0.0..1.0).contains(&recurrent_dropout));
        let g = 4 * units;
        Self {
            in_features,
            units,
            dropout,
            recurrent_dropout,
            wx: Tensor::from_vec(&[in_features, g], glorot_uniform(rng, in_features, g, in_features * g)),
            wh: Tensor::from_vec(&[units, g], glorot_uniform(rng, units, g, units * g)),
            b: Tensor::zeros(&[g]),
            gwx: Tensor::zeros(&[in_features, g]),
            gwh: Tensor::zeros(&[units, g]),
            gb: Tensor::zeros(&[g]),
            steps: Vec::new(),
            cache_batch: 0,
        }
    }

    fn make_mask(rng: &mut ChaCha20Rng, n: usize, rate: f64, training: bool) -> Vec<F> {
        if !training || rate == 0.0 {
            return vec![F::one(); n];
        }
        let keep = 1.0 - rate;
        (0..n)
            .map(|_| {
                if rng.gen_range(0.0..1.0) < keep {
                    F::from_f64(1.0 / keep)
                } else {
                    F::zero()
                }
            })
            .collect()
    }

    fn forward(&mut self, x: &Tensor<F>, training: bool, rng: &mut ChaCha20Rng) -> Result<Tensor<F>> {
        if x.shape.len() != 3 || x.shape[2] != self.in_features {
            return Err(shape_err(&format!("(B, T, {})", self.in_features), &x.shape));
        }
        let (b, t_len) = (x.shape[0], x.shape[1]);
        let u = self.units;
        let g = 4 * u;
        let mut y = Tensor::zeros(&[b, t_len, u]);
        let mut h = vec![F::zero(); b * u];
        let mut c = vec![F::zero(); b * u];
        self.steps.clear();
        self.cache_batch = b;

        for t in 0..t_len {
            let mask_x = Self::make_mask(rng, b * self.in_features, self.dropout, training);
            let mask_h = Self::make_mask(rng, b * u, self.recurrent_dropout, training);
            let mut x_masked = vec![F::zero(); b * self.in_features];
            for bi in 0..b {
                for fi in 0..self.in_features {
                    x_masked[bi * self.in_features + fi] =
                        x.data[(bi * t_len + t) * self.in_features + fi] * mask_x[bi * self.in_features + fi];
                }
            }
            let h_masked: Vec<F> = h.iter().zip(&mask_h).map(|(&hv, &m)| hv * m).collect();

            // z = x~ Wx + h~ Wh + b
            let mut z = vec![F::zero(); b * g];
            for row in z.chunks_mut(g) {
                row.copy_from_slice(&self.b.data);
            }
            matmul(&x_masked, &self.wx.data, &mut z, b, self.in_features, g);
            matmul(&h_masked, &self.wh.data, &mut z, b, u, g);

            let c_prev = c.clone();
            let mut gates = vec![F::zero(); b * g];
            let mut tanh_c = vec![F::zero(); b * u];
            for bi in 0..b {
                for ui in 0..u {
                    let zi = z[bi * g + ui];
                    let zf = z[bi * g + u + ui];
                    let zg = z[bi * g + 2 * u + ui];
                    let zo = z[bi * g + 3 * u + ui];
                    let ig = sigmoid(zi);
                    let fg = sigmoid(zf);
                    let gg = zg.tanh();
                    let og = sigmoid(zo);
                    gates[bi * g + ui] = ig;
                    gates[bi * g + u + ui] = fg;
                    gates[bi * g + 2 * u + ui] = gg;
                    gates[bi * g + 3 * u + ui] = og;
                    let cv = fg * c_prev[bi * u + ui] + ig * gg;
                    c[bi * u + ui] = cv;
                    let tc = cv.tanh();
                    tanh_c[bi * u + ui] = tc;
                    let hv = og * tc;
                    h[bi * u + ui] = hv;
                    y.data[(bi * t_len + t) * u + ui] = hv;
                }
            }
            self.steps.push(LstmStepCache {
                x_masked,
                h_masked,
                gates,
                c_prev,
                tanh_c,
                mask_x,
                mask_h,
            });
        }
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let b = self.cache_batch;
        let t_len = self.steps.len();
        let u = self.units;
        let g = 4 * u;
        let fin = self.in_features;
        let mut dx = Tensor::zeros(&[b, t_len, fin]);
        let mut dh_next = vec![F::zero(); b * u];
        let mut dc_next = vec![F::zero(); b * u];
        let wxt = transpose(&self.wx.data, fin, g);
        let wht = transpose(&self.wh.data, u, g);

        for t in (0..t_len).rev() {
            let step = &self.steps[t];
            let mut dz = vec![F::zero(); b * g];
            for bi in 0..b {
                for ui in 0..u {
                    let dh = dy.data[(bi * t_len + t) * u + ui] + dh_next[bi * u + ui];
                    let ig = step.gates[bi * g + ui];
                    let fg = step.gates[bi * g + u + ui];
                    let gg = step.gates[bi * g + 2 * u + ui];
                    let og = step.gates[bi * g + 3 * u + ui];
                    let tc = step.tanh_c[bi * u + ui];
                    let dtc = dh * og * (F::one() - tc * tc) + dc_next[bi * u + ui];
                    let d_o = dh * tc;
                    let d_i = dtc * gg;
                    let d_f = dtc * step.c_prev[bi * u + ui];
                    let d_g = dtc * ig;
                    dc_next[bi * u + ui] = dtc * fg;
                    dz[bi * g + ui] = d_i * ig * (F::one() - ig);
                    dz[bi * g + u + ui] = d_f * fg * (F::one() - fg);
                    dz[bi * g + 2 * u + ui] = d_g * (F::one() - gg * gg);
                    dz[bi * g + 3 * u + ui] = d_o * og * (F::one() - og);
                }
            }
            // parameter gradients
            matmul_at_b(&step.x_masked, &dz, &mut self.gwx.data, b, fin, g);
            matmul_at_b(&step.h_masked, &dz, &mut self.gwh.data, b, u, g);
            for row in dz.chunks(g) {
                for (gb, &d) in self.gb.data.iter_mut().zip(row) {
                    *gb += d;
                }
            }
            // input gradient through the input mask
            let mut dxm = vec![F::zero(); b * fin];
            matmul(&dz, &wxt, &mut dxm, b, g, fin);
            for bi in 0..b {
                for fi in 0..fin {
                    dx.data[(bi * t_len + t) * fin + fi] =
                        dxm[bi * fin + fi] * step.mask_x[bi * fin + fi];
                }
            }
            // recurrent gradient through the recurrent mask
            let mut dhm = vec![F::zero(); b * u];
            matmul(&dz, &wht, &mut dhm, b, g, u);
            for (dh, (&d, &m)) in dh_next.iter_mut().zip(dhm.iter().zip(&step.mask_h)) {
                *dh = d * m;
            }
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- dropout

pub struct Dropout<F: Scalar> {
    pub rate: f64,
    mask: Vec<F>,
}

impl<F: Scalar> Dropout<F> {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate));
        Self { rate, mask: Vec::new() }
    }

    fn forward(&mut self, x: &Tensor<F>, training: bool, rng: &mut ChaCha20Rng) -> Result<Tensor<F>> {
        if !training || self.rate == 0.0 {
            self.mask.clear();
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        self.mask = (0..x.numel())
            .map(|_| {
                if rng.gen_range(0.0..1.0) < keep {
                    F::from_f64(1.0 / keep)
                } else {
                    F::zero()
                }
            })
            .collect();
        let mut y = x.clone();
        for (v, &m) in y.data.iter_mut().zip(&self.mask) {
            *v *= m;
        }
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        if self.mask.is_empty() {
            return Ok(dy.clone());
        }
        let mut dx = dy.clone();
        for (v, &m) in dx.data.iter_mut().zip(&self.mask) {
            *v *= m;
        }
        Ok(dx)
    }
}

// ---------------------------------------------------------------- relu

pub struct Relu<F: Scalar> {
    mask: Vec<bool>,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> Relu<F> {
    pub fn new() -> Self {
        Self {
            mask: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    fn forward(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.mask = x.data.iter().map(|&v| v > F::zero()).collect();
        let mut y = x.clone();
        for v in &mut y.data {
            if *v < F::zero() {
                *v = F::zero();
            }
        }
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Result<Tensor<F>> {
        let mut dx = dy.clone();
        for (v, &keep) in dx.data.iter_mut().zip(&self.mask) {
            if !keep {
                *v = F::zero();
            }
        }
        Ok(dx)
    }
}

impl<F: Scalar> Default for Relu<F> {
    fn default() -> Self {
        Self::new()
    }
}
