use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, join_name, NnError, Parameters, Tensor2};

/// Valid 1-D convolution along the time axis with ReLU.
///
/// `kernels` is `K × (W·F)`; entry `(k, w·F + f)` weights feature `f` at
/// time offset `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dParams {
    pub kernels: Tensor2,
    pub bias: Tensor2,
    pub width: usize,
}

impl Conv1dParams {
    pub fn zeros(features: usize, channels: usize, width: usize) -> Self {
        Self {
            kernels: Tensor2::zeros(channels, width * features),
            bias: Tensor2::zeros(channels, 1),
            width,
        }
    }

    pub fn init<R: Rng>(features: usize, channels: usize, width: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(features, channels, width);
        glorot_uniform(&mut p.kernels, width * features, channels, rng);
        p
    }

    pub fn channels(&self) -> usize {
        self.kernels.rows()
    }

    pub fn features(&self) -> usize {
        self.kernels.cols() / self.width
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.features(), self.channels(), self.width)
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        self.kernels.axpy(scale, &other.kernels);
        self.bias.axpy(scale, &other.bias);
    }
}

impl Parameters for Conv1dParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor2)) {
        f(join_name(prefix, "kernels"), &self.kernels);
        f(join_name(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor2)) {
        f(&mut self.kernels);
        f(&mut self.bias);
    }
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    pub input: Tensor2,
    /// Post-activation output; positive entries mark where ReLU passed.
    pub output: Tensor2,
}

pub fn conv1d_forward(p: &Conv1dParams, seq: &Tensor2) -> Result<Conv1dCache, NnError> {
    let (len, features) = seq.shape();
    if features != p.features() {
        return Err(NnError::ShapeMismatch {
            context: "conv1d_forward",
            expected: (len, p.features()),
            got: seq.shape(),
        });
    }
    if p.width > len || p.width == 0 {
        return Err(NnError::KernelTooWide { width: p.width, len });
    }
    let out_len = len - p.width + 1;
    let mut out = Tensor2::zeros(out_len, p.channels());
    // rows t..t+W are contiguous in row-major storage
    let window = p.width * features;
    for t in 0..out_len {
        let patch = &seq.as_slice()[t * features..t * features + window];
        for k in 0..p.channels() {
            let pre = super::dot(p.kernels.row(k), patch) + p.bias.get(k, 0);
            out.set(t, k, pre.max(0.0));
        }
    }
    Ok(Conv1dCache {
        input: seq.clone(),
        output: out,
    })
}

/// Returns ∂L/∂input and accumulates parameter gradients.
pub fn conv1d_backward(p: &Conv1dParams, cache: &Conv1dCache, d_out: &Tensor2, grads: &mut Conv1dParams) -> Tensor2 {
    let features = p.features();
    let window = p.width * features;
    let mut d_in = cache.input.zeros_like();
    for t in 0..cache.output.rows() {
        let patch = &cache.input.as_slice()[t * features..t * features + window];
        for k in 0..p.channels() {
            if cache.output.get(t, k) <= 0.0 {
                continue;
            }
            let d = d_out.get(t, k);
            if d == 0.0 {
                continue;
            }
            grads.bias.as_mut_slice()[k] += d;
            for (g, &x) in grads.kernels.row_mut(k).iter_mut().zip(patch) {
                *g += d * x;
            }
            let d_patch = &mut d_in.as_mut_slice()[t * features..t * features + window];
            for (dx, &w) in d_patch.iter_mut().zip(p.kernels.row(k)) {
                *dx += d * w;
            }
        }
    }
    d_in
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    pub input_rows: usize,
    /// For every pooled cell, the input row holding the maximum.
    pub argmax: Vec<usize>,
}

/// Per-channel max over non-overlapping windows along time. A trailing
/// partial window is kept, so the output has `ceil(T / window)` rows.
pub fn maxpool1d(seq: &Tensor2, window: usize) -> (Tensor2, PoolCache) {
    assert!(window >= 1, "pool window must be positive");
    let (len, ch) = seq.shape();
    let out_len = len.div_ceil(window);
    let mut out = Tensor2::zeros(out_len, ch);
    let mut argmax = vec![0; out_len * ch];
    for o in 0..out_len {
        let start = o * window;
        let end = (start + window).min(len);
        for c in 0..ch {
            let mut best = start;
            for t in start + 1..end {
                if seq.get(t, c) > seq.get(best, c) {
                    best = t;
                }
            }
            out.set(o, c, seq.get(best, c));
            argmax[o * ch + c] = best;
        }
    }
    (
        out,
        PoolCache {
            input_rows: len,
            argmax,
        },
    )
}

pub fn maxpool1d_backward(cache: &PoolCache, d_out: &Tensor2) -> Tensor2 {
    let ch = d_out.cols();
    let mut d_in = Tensor2::zeros(cache.input_rows, ch);
    for o in 0..d_out.rows() {
        for c in 0..ch {
            let t = cache.argmax[o * ch + c];
            let v = d_in.get(t, c) + d_out.get(o, c);
            d_in.set(t, c, v);
        }
    }
    d_in
}
