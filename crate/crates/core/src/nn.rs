//! Minimal dense-network machinery: forward passes, reverse-mode gradients,
//! Adam, and flat parameter-vector plumbing.
//!
//! Everything is `f64`. A network's parameters live in one flat vector in a
//! canonical order — for each layer, the weight matrix row-major
//! (`out x in`), then the biases — so snapshotting, merging, soft updates,
//! and (de)serialization are all plain slice operations. Hidden layers use
//! ReLU; the output layer is affine.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A network's full parameter set in canonical flat order.
pub type ParamVector = Vec<f64>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("a network needs at least input and output dims, got {0}")]
    TooFewLayers(usize),
    #[error("layer dimensions must be positive")]
    ZeroDim,
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("checkpoint magic bytes mismatch")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u8),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("checkpoint layer header is implausible")]
    BadHeader,
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for NnError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            NnError::Truncated
        } else {
            NnError::Io(e)
        }
    }
}

/// Dot product with eight parallel accumulation lanes. The lane structure is
/// fixed, so results are bit-reproducible run to run.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 8];
    let a8 = a.chunks_exact(8);
    let b8 = b.chunks_exact(8);
    let tail: f64 = a8
        .remainder()
        .iter()
        .zip(b8.remainder())
        .map(|(&x, &y)| x * y)
        .sum();
    for (ca, cb) in a8.zip(b8) {
        for j in 0..8 {
            lanes[j] = ca[j].mul_add(cb[j], lanes[j]);
        }
    }
    (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]))
        + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])))
        + tail
}

/// `y += a * x`, elementwise.
#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = a.mul_add(xi, *yi);
    }
}

/// Dense matrix-vector product `out = W x + b`, optionally ReLU-clamped.
/// Rows are processed four at a time so each chunk of `x` is loaded once and
/// sixteen accumulator lanes keep the FMA pipeline busy.
fn matvec(
    weights: &[f64],
    biases: &[f64],
    fan_in: usize,
    x: &[f64],
    out: &mut [f64],
    relu: bool,
) {
    debug_assert_eq!(weights.len(), fan_in * out.len());
    debug_assert_eq!(biases.len(), out.len());
    debug_assert_eq!(x.len(), fan_in);
    let mut rows = out.chunks_exact_mut(4);
    let mut o = 0;
    for out4 in &mut rows {
        let w0 = &weights[o * fan_in..(o + 1) * fan_in];
        let w1 = &weights[(o + 1) * fan_in..(o + 2) * fan_in];
        let w2 = &weights[(o + 2) * fan_in..(o + 3) * fan_in];
        let w3 = &weights[(o + 3) * fan_in..(o + 4) * fan_in];
        let mut acc0 = [0.0f64; 4];
        let mut acc1 = [0.0f64; 4];
        let mut acc2 = [0.0f64; 4];
        let mut acc3 = [0.0f64; 4];
        let chunks = fan_in / 4;
        for k in 0..chunks {
            let i = k * 4;
            for j in 0..4 {
                let xv = x[i + j];
                acc0[j] = w0[i + j].mul_add(xv, acc0[j]);
                acc1[j] = w1[i + j].mul_add(xv, acc1[j]);
                acc2[j] = w2[i + j].mul_add(xv, acc2[j]);
                acc3[j] = w3[i + j].mul_add(xv, acc3[j]);
            }
        }
        let mut sums = [
            (acc0[0] + acc0[1]) + (acc0[2] + acc0[3]),
            (acc1[0] + acc1[1]) + (acc1[2] + acc1[3]),
            (acc2[0] + acc2[1]) + (acc2[2] + acc2[3]),
            (acc3[0] + acc3[1]) + (acc3[2] + acc3[3]),
        ];
        for i in chunks * 4..fan_in {
            let xv = x[i];
            sums[0] = w0[i].mul_add(xv, sums[0]);
            sums[1] = w1[i].mul_add(xv, sums[1]);
            sums[2] = w2[i].mul_add(xv, sums[2]);
            sums[3] = w3[i].mul_add(xv, sums[3]);
        }
        for (r, out_r) in out4.iter_mut().enumerate() {
            let mut v = sums[r] + biases[o + r];
            if relu && v < 0.0 {
                v = 0.0;
            }
            *out_r = v;
        }
        o += 4;
    }
    for (r, out_r) in rows.into_remainder().iter_mut().enumerate() {
        let row = &weights[(o + r) * fan_in..(o + r + 1) * fan_in];
        let mut v = dot(row, x) + biases[o + r];
        if relu && v < 0.0 {
            v = 0.0;
        }
        *out_r = v;
    }
}

fn check_dims(dims: &[usize]) -> Result<(), NnError> {
    if dims.len() < 2 {
        return Err(NnError::TooFewLayers(dims.len()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(NnError::ZeroDim);
    }
    Ok(())
}

/// Total parameter count for a layer-dimension list.
pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// A fully connected network with ReLU hidden activations and a linear
/// output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet {
    dims: Vec<usize>,
    params: Vec<f64>,
}

impl DenseNet {
    /// Random initialization: weights uniform in `±1/sqrt(fan_in)`, biases
    /// zero. Identical seeds yield identical networks.
    pub fn init(dims: &[usize], seed: u64) -> Result<DenseNet, NnError> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..=bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(DenseNet {
            dims: dims.to_vec(),
            params,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<DenseNet, NnError> {
        check_dims(dims)?;
        Ok(DenseNet {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
        })
    }

    /// Rebuilds a network from a flat parameter vector (inverse of
    /// [`DenseNet::flatten`]).
    pub fn from_params(dims: &[usize], params: ParamVector) -> Result<DenseNet, NnError> {
        check_dims(dims)?;
        let expected = param_count(dims);
        if params.len() != expected {
            return Err(NnError::ParamCount {
                expected,
                got: params.len(),
            });
        }
        Ok(DenseNet {
            dims: dims.to_vec(),
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// The parameters in canonical flat order.
    pub fn flatten(&self) -> ParamVector {
        self.params.clone()
    }

    /// Replaces all parameters from a flat vector of matching length.
    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.params.len() {
            return Err(NnError::ParamCount {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Forward pass, writing every layer's activations into `ws` so a
    /// backward pass can follow. The network output ends up in
    /// `ws.activation(L)` where `L = dims.len() - 1`.
    pub fn forward_ws<'w>(&self, input: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        assert_eq!(input.len(), self.input_dim(), "input size mismatch");
        ws.ensure(&self.dims);
        ws.acts[0].copy_from_slice(input);
        let layers = self.dims.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let z = &mut next[0];
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            matvec(weights, biases, fan_in, x, z, l < layers - 1);
            offset += fan_in * fan_out + fan_out;
        }
        &ws.acts[layers]
    }

    /// Convenience forward pass that allocates its own scratch space.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::new();
        self.forward_ws(input, &mut ws).to_vec()
    }

    /// Accumulates `coef * dL/dtheta` into `grad`, where `L` is any scalar
    /// function of the network output with gradient `out_grad` at the output.
    /// Expects `ws` to hold the activations of the forward pass for the same
    /// input, and `grad` to have full parameter length.
    pub fn backprop_ws(&self, ws: &mut Workspace, out_grad: &[f64], coef: f64, grad: &mut [f64]) {
        assert_eq!(out_grad.len(), self.output_dim(), "output grad size mismatch");
        assert_eq!(grad.len(), self.params.len(), "grad buffer size mismatch");
        let layers = self.dims.len() - 1;
        ws.delta.clear();
        ws.delta.extend_from_slice(out_grad);
        // Offset of the last layer's weights.
        let mut offset = self.params.len()
            - (self.dims[layers - 1] * self.dims[layers] + self.dims[layers]);
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let x = &ws.acts[l];
            let (grad_w, grad_rest) = grad[offset..].split_at_mut(fan_in * fan_out);
            let grad_b = &mut grad_rest[..fan_out];
            for (o, &d) in ws.delta.iter().enumerate() {
                let cd = coef * d;
                axpy(&mut grad_w[o * fan_in..(o + 1) * fan_in], cd, x);
                grad_b[o] += cd;
            }
            if l > 0 {
                ws.delta_prev.clear();
                ws.delta_prev.resize(fan_in, 0.0);
                for (o, &d) in ws.delta.iter().enumerate() {
                    axpy(&mut ws.delta_prev, d, &weights[o * fan_in..(o + 1) * fan_in]);
                }
                // ReLU gate: units that were inactive pass no gradient.
                for (dp, &a) in ws.delta_prev.iter_mut().zip(x.iter()) {
                    if a <= 0.0 {
                        *dp = 0.0;
                    }
                }
                std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
                offset -= self.dims[l - 1] * fan_in + fan_in;
            }
        }
    }

    /// Gradient of `<output, out_grad>` with respect to all parameters, in
    /// canonical flat order.
    pub fn backprop(&self, input: &[f64], out_grad: &[f64]) -> ParamVector {
        let mut ws = Workspace::new();
        self.forward_ws(input, &mut ws);
        let mut grad = vec![0.0; self.params.len()];
        self.backprop_ws(&mut ws, out_grad, 1.0, &mut grad);
        grad
    }
}

/// Reusable forward/backward scratch buffers.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Workspace {
        Workspace::default()
    }

    fn ensure(&mut self, dims: &[usize]) {
        self.acts.resize(dims.len(), Vec::new());
        for (buf, &d) in self.acts.iter_mut().zip(dims) {
            buf.resize(d, 0.0);
        }
    }

    /// Activations of layer `l` from the most recent forward pass
    /// (`l = 0` is the input).
    pub fn activation(&self, l: usize) -> &[f64] {
        &self.acts[l]
    }
}

/// Numerically safe softmax (shifts by the max logit before exponentiating).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// In-place variant of [`softmax`].
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = (z - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Shannon entropy in nats, with the `0 ln 0 = 0` convention.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Index of the largest element; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `target = tau * online + (1 - tau) * target`, the Polyak soft update.
pub fn soft_update(target: &mut DenseNet, online: &DenseNet, tau: f64) {
    assert_eq!(target.dims, online.dims, "soft update across architectures");
    for (t, &o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

/// Adam with bias correction over one flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    /// Defaults: `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(lr: f64, n: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One optimizer step. A zero gradient leaves `params` untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "optimizer size mismatch");
        assert_eq!(params.len(), grad.len(), "gradient size mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"GMRL";
const CHECKPOINT_VERSION: u8 = 1;
/// Upper bound on the layer count in a checkpoint header; anything larger is
/// treated as corruption rather than an allocation request.
const MAX_HEADER_LAYERS: u32 = 64;

/// Writes a network to `path`: magic `GMRL`, a version byte, the layer-dim
/// header (count then each dim, little-endian u32), then the parameters as
/// little-endian f64 in canonical flat order.
pub fn save_params(net: &DenseNet, path: &Path) -> Result<(), NnError> {
    let mut buf =
        Vec::with_capacity(5 + 4 * (net.dims.len() + 1) + 8 * net.params.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.push(CHECKPOINT_VERSION);
    buf.extend_from_slice(&(net.dims.len() as u32).to_le_bytes());
    for &d in &net.dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &p in &net.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a network previously written by [`save_params`].
pub fn load_params(path: &Path) -> Result<DenseNet, NnError> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::BadMagic);
    }
    let mut version = [0u8; 1];
    file.read_exact(&mut version)?;
    if version[0] != CHECKPOINT_VERSION {
        return Err(NnError::BadVersion(version[0]));
    }
    let mut u32buf = [0u8; 4];
    file.read_exact(&mut u32buf)?;
    let n_dims = u32::from_le_bytes(u32buf);
    if n_dims < 2 || n_dims > MAX_HEADER_LAYERS {
        return Err(NnError::BadHeader);
    }
    let mut dims = Vec::with_capacity(n_dims as usize);
    for _ in 0..n_dims {
        file.read_exact(&mut u32buf)?;
        let d = u32::from_le_bytes(u32buf);
        if d == 0 {
            return Err(NnError::BadHeader);
        }
        dims.push(d as usize);
    }
    let expected = param_count(&dims);
    let mut params = Vec::with_capacity(expected);
    let mut f64buf = [0u8; 8];
    for _ in 0..expected {
        file.read_exact(&mut f64buf)?;
        params.push(f64::from_le_bytes(f64buf));
    }
    let mut rest = Vec::new();
    file.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NnError::TrailingBytes(rest.len()));
    }
    DenseNet::from_params(&dims, params)
}
