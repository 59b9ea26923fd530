//! The core network `N(·; Θ)` and its residual wrapper.
//!
//! Hidden layers use ReLU, the output layer is affine. The residual solver is
//! `p_out = p_in + N(p_in; Θ)`. Gradients are computed by hand-written
//! backpropagation for the per-sample squared loss `‖p_out - y2‖²`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Standard deviation of the initial biases.
pub const BIAS_INIT_STD: f64 = 0.01;

/// Rectangular architecture: `hidden_layers` layers of `hidden_width` neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_layers: usize, hidden_width: usize) -> Result<Self> {
        let arch = Architecture { input_dim, hidden_layers, hidden_width, output_dim: input_dim };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_width == 0 {
            return Err(invalid(format!("architecture dimensions must be positive: {self:?}")));
        }
        if self.hidden_layers == 0 {
            return Err(invalid("at least one hidden layer is required"));
        }
        if self.output_dim != self.input_dim {
            return Err(invalid(format!(
                "flow-map network must be square, got input {} and output {}",
                self.input_dim, self.output_dim
            )));
        }
        Ok(())
    }

    /// Number of affine maps, `M - 1`.
    pub fn affine_layers(&self) -> usize {
        self.hidden_layers + 1
    }

    /// `(rows, cols)` of weight matrix `i`.
    pub fn weight_shape(&self, i: usize) -> (usize, usize) {
        let rows = if i == self.hidden_layers { self.output_dim } else { self.hidden_width };
        let cols = if i == 0 { self.input_dim } else { self.hidden_width };
        (rows, cols)
    }

    pub fn parameter_count(&self) -> usize {
        (0..self.affine_layers())
            .map(|i| {
                let (r, c) = self.weight_shape(i);
                r * c + r
            })
            .sum()
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged matrix rows".into()));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.concat() })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn mul_vec_add(&self, x: &[f64], bias: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = bias[r] + dot(self.row(r), x);
        }
    }

    fn transpose_mul_vec(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (o, w) in out.iter_mut().zip(self.row(r)) {
                    *o += vr * w;
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights `W_1..W_{M-1}` and biases `b_1..b_{M-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    arch: Architecture,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Pre- and post-activation values of every layer from one forward pass.
/// `activations[0]` is the input; `activations[i + 1]` is the output of
/// affine map `i` after its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub pre_activations: Vec<Vec<f64>>,
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn new(arch: &Architecture) -> Self {
        let mut activations = vec![vec![0.0; arch.input_dim]];
        let mut pre_activations = Vec::with_capacity(arch.affine_layers());
        for i in 0..arch.affine_layers() {
            let (rows, _) = arch.weight_shape(i);
            pre_activations.push(vec![0.0; rows]);
            activations.push(vec![0.0; rows]);
        }
        ForwardCache { pre_activations, activations }
    }

    /// Output of the core network `N(x)`.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has an output layer")
    }

    fn matches(&self, arch: &Architecture) -> bool {
        self.pre_activations.len() == arch.affine_layers()
            && self.activations.len() == arch.affine_layers() + 1
            && self.activations[0].len() == arch.input_dim
            && (0..arch.affine_layers()).all(|i| {
                let (rows, _) = arch.weight_shape(i);
                self.pre_activations[i].len() == rows && self.activations[i + 1].len() == rows
            })
    }
}

/// Gradient of the loss with respect to every parameter, plus the gradient
/// with respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros(arch: &Architecture) -> Self {
        let p = NetParams::zeros(*arch);
        Gradients { weights: p.weights, biases: p.biases, input: vec![0.0; arch.input_dim] }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.data.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl NetParams {
    pub fn zeros(arch: Architecture) -> Self {
        let weights = (0..arch.affine_layers())
            .map(|i| {
                let (r, c) = arch.weight_shape(i);
                Matrix::zeros(r, c)
            })
            .collect();
        let biases = (0..arch.affine_layers()).map(|i| vec![0.0; arch.weight_shape(i).0]).collect();
        NetParams { arch, weights, biases }
    }

    /// Builds parameters from explicit layers, checking the shape chain.
    pub fn from_layers(weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() < 2 || weights.len() != biases.len() {
            return Err(Error::ShapeMismatch(format!(
                "need ≥ 2 affine layers with one bias each, got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        let arch = Architecture {
            input_dim: weights[0].cols,
            hidden_layers: weights.len() - 1,
            hidden_width: weights[0].rows,
            output_dim: weights[weights.len() - 1].rows,
        };
        arch.validate().map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let params = NetParams { arch, weights, biases };
        params.check_shapes()?;
        Ok(params)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn check_shapes(&self) -> Result<()> {
        let arch = &self.arch;
        if self.weights.len() != arch.affine_layers() || self.biases.len() != arch.affine_layers() {
            return Err(Error::ShapeMismatch("layer count does not match architecture".into()));
        }
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (r, c) = arch.weight_shape(i);
            if w.rows != r || w.cols != c || w.data.len() != r * c {
                return Err(Error::ShapeMismatch(format!(
                    "weight {i} is {}x{} ({} entries), expected {r}x{c}",
                    w.rows,
                    w.cols,
                    w.data.len()
                )));
            }
            if b.len() != r {
                return Err(Error::ShapeMismatch(format!("bias {i} has length {}, expected {r}", b.len())));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.data.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Zeroes the last affine map, making the residual solver the identity.
    pub fn zero_output_layer(&mut self) {
        let last = self.arch.hidden_layers;
        self.weights[last].data.iter_mut().for_each(|v| *v = 0.0);
        self.biases[last].iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(&w.data);
            out.extend_from_slice(b);
        }
        out
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim {
            return Err(Error::DimensionMismatch { expected: self.arch.input_dim, found: x.len() });
        }
        Ok(())
    }

    /// Forward pass into a reusable cache.
    pub fn forward_into(&self, x: &[f64], cache: &mut ForwardCache) -> Result<()> {
        self.check_input(x)?;
        if !cache.matches(&self.arch) {
            return Err(Error::ShapeMismatch("forward cache does not match architecture".into()));
        }
        self.forward_unchecked(x, cache);
        Ok(())
    }

    fn forward_unchecked(&self, x: &[f64], cache: &mut ForwardCache) {
        let last = self.arch.hidden_layers;
        cache.activations[0].copy_from_slice(x);
        for i in 0..=last {
            let (before, after) = cache.activations.split_at_mut(i + 1);
            let z = &mut cache.pre_activations[i];
            self.weights[i].mul_vec_add(&before[i], &self.biases[i], z);
            let a = &mut after[0];
            if i == last {
                a.copy_from_slice(z);
            } else {
                for (ai, &zi) in a.iter_mut().zip(z.iter()) {
                    *ai = zi.max(0.0);
                }
            }
        }
    }

    fn backward_unchecked(&self, cache: &ForwardCache, residual: &[f64], grads: &mut Gradients, delta: &mut Vec<f64>, next: &mut Vec<f64>) {
        delta.clear();
        delta.extend_from_slice(residual);
        for i in (0..self.arch.affine_layers()).rev() {
            let input = &cache.activations[i];
            let gw = &mut grads.weights[i];
            for (r, &d) in delta.iter().enumerate() {
                let row = &mut gw.data[r * gw.cols..(r + 1) * gw.cols];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
            }
            grads.biases[i].copy_from_slice(delta);

            next.resize(self.weights[i].cols, 0.0);
            self.weights[i].transpose_mul_vec(delta, next);
            if i > 0 {
                // ReLU subgradient, taken as 0 at the kink.
                for (n, &z) in next.iter_mut().zip(&cache.pre_activations[i - 1]) {
                    if z <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            std::mem::swap(delta, next);
        }
        grads.input.copy_from_slice(delta);
    }

    /// Backpropagates `output_residual = ∂L/∂N(x)` through a cache produced by
    /// [`forward`](NetParams::forward) on these parameters.
    pub fn backward_into(&self, cache: &ForwardCache, output_residual: &[f64], grads: &mut Gradients) -> Result<()> {
        if !cache.matches(&self.arch) {
            return Err(Error::ShapeMismatch("forward cache does not match architecture".into()));
        }
        if output_residual.len() != self.arch.output_dim {
            return Err(Error::DimensionMismatch { expected: self.arch.output_dim, found: output_residual.len() });
        }
        let shape_ok = grads.weights.len() == self.weights.len()
            && grads.weights.iter().zip(&self.weights).all(|(g, w)| g.rows == w.rows && g.cols == w.cols)
            && grads.biases.iter().zip(&self.biases).all(|(g, b)| g.len() == b.len())
            && grads.biases.len() == self.biases.len()
            && grads.input.len() == self.arch.input_dim;
        if !shape_ok {
            return Err(Error::ShapeMismatch("gradient buffer does not match architecture".into()));
        }
        let mut delta = Vec::new();
        let mut next = Vec::new();
        self.backward_unchecked(cache, output_residual, grads, &mut delta, &mut next);
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let mut cache = ForwardCache::new(&self.arch);
        self.forward_into(x, &mut cache)?;
        Ok((cache.output().to_vec(), cache))
    }

    /// `x + N(x)`.
    pub fn resnet_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (n, _) = self.forward(x)?;
        Ok(x.iter().zip(n).map(|(a, b)| a + b).collect())
    }

    pub fn backward(&self, cache: &ForwardCache, output_residual: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros(&self.arch);
        self.backward_into(cache, output_residual, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](NetParams::backward) but for the residual solver:
    /// the skip connection adds `output_residual` to the input gradient.
    pub fn resnet_backward(&self, cache: &ForwardCache, output_residual: &[f64]) -> Result<Gradients> {
        let mut grads = self.backward(cache, output_residual)?;
        for (g, r) in grads.input.iter_mut().zip(output_residual) {
            *g += r;
        }
        Ok(grads)
    }

    /// In-place `Θ ← Θ - lr · ∇Θ`. Rejects non-finite gradients without
    /// touching the parameters.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be non-negative, got {learning_rate}")));
        }
        let shape_ok = grads.weights.len() == self.weights.len()
            && grads.biases.len() == self.biases.len()
            && grads.weights.iter().zip(&self.weights).all(|(g, w)| g.data.len() == w.data.len())
            && grads.biases.iter().zip(&self.biases).all(|(g, b)| g.len() == b.len());
        if !shape_ok {
            return Err(Error::ShapeMismatch("gradient shape does not match parameters".into()));
        }
        if !grads.all_finite() {
            return Err(Error::NonFiniteGradient);
        }
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (wv, gv) in w.data.iter_mut().zip(&g.data) {
                *wv -= learning_rate * gv;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (bv, gv) in b.iter_mut().zip(g) {
                *bv -= learning_rate * gv;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ParamsDoc {
            format_version: PARAMS_FORMAT_VERSION,
            architecture: self.arch,
            weights: self.weights.clone(),
            biases: self.biases.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ParamsDoc = serde_json::from_str(s)?;
        if doc.format_version != PARAMS_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported parameter format version {}", doc.format_version)));
        }
        doc.architecture.validate()?;
        let params = NetParams { arch: doc.architecture, weights: doc.weights, biases: doc.biases };
        params.check_shapes()?;
        if !params.all_finite() {
            return Err(Error::Parse("non-finite parameter value".into()));
        }
        Ok(params)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    format_version: u32,
    architecture: Architecture,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// ChaCha stream used for initialization. Learning-set pairs use streams
/// `0..J`, so the top of the range keeps the two independent.
pub const INIT_STREAM: u64 = u64::MAX;

/// Normal initialization: weight std `1/√fan_in`, bias std [`BIAS_INIT_STD`].
pub fn init_params(arch: Architecture, seed: u64) -> Result<NetParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let mut params = NetParams::zeros(arch);
    let bias_dist = Normal::new(0.0, BIAS_INIT_STD).expect("positive std");
    for (w, b) in params.weights.iter_mut().zip(params.biases.iter_mut()) {
        let std = 1.0 / (w.cols as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("positive std");
        w.data.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        b.iter_mut().for_each(|v| *v = bias_dist.sample(&mut rng));
    }
    Ok(params)
}

/// Returns `params - learning_rate · grads`.
pub fn sgd_update(params: &NetParams, grads: &Gradients, learning_rate: f64) -> Result<NetParams> {
    let mut out = params.clone();
    out.sgd_step(grads, learning_rate)?;
    Ok(out)
}

/// Per-sample training step on `‖x + N(x) - target‖²`, reusing buffers.
/// Returns the loss before the update.
pub(crate) struct SampleStepper {
    cache: ForwardCache,
    grads: Gradients,
    residual: Vec<f64>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl SampleStepper {
    pub(crate) fn new(arch: &Architecture) -> Self {
        SampleStepper {
            cache: ForwardCache::new(arch),
            grads: Gradients::zeros(arch),
            residual: vec![0.0; arch.output_dim],
            delta: Vec::new(),
            next: Vec::new(),
        }
    }

    pub(crate) fn step(&mut self, params: &mut NetParams, x: &[f64], target: &[f64], lr: f64) -> Result<f64> {
        params.forward_unchecked(x, &mut self.cache);
        let mut loss = 0.0;
        for (i, r) in self.residual.iter_mut().enumerate() {
            let diff = x[i] + self.cache.output()[i] - target[i];
            loss += diff * diff;
            *r = 2.0 * diff;
        }
        if !loss.is_finite() {
            return Ok(loss);
        }
        params.backward_unchecked(&self.cache, &self.residual, &mut self.grads, &mut self.delta, &mut self.next);
        params.sgd_step(&self.grads, lr)?;
        Ok(loss)
    }

    /// `x + N(x)` into `out`.
    pub(crate) fn predict(&mut self, params: &NetParams, x: &[f64], out: &mut [f64]) {
        params.forward_unchecked(x, &mut self.cache);
        for (i, o) in out.iter_mut().enumerate() {
            *o = x[i] + self.cache.output()[i];
        }
    }
}
