//! Actor and critic networks with hand-written reverse mode.
//!
//! Input bundle layout (one row per sample):
//! `[throughput × H, download time × H, next sizes × A, buffer, remaining, last quality]`.
//! Each vector input goes through its own 1D convolution bank (same
//! padding, so the output keeps the input length); each scalar through its
//! own dense layer. All of those are ReLU'd and concatenated, then a hidden
//! dense ReLU layer feeds the head: softmax over actions for the actor, a
//! single linear unit for the critic.

use std::ops::Range;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::real::{gemm, Mat, Real};
use crate::error::{Error, Result};

/// Scalar inputs: buffer, chunks remaining, last-rung quality.
pub const SCALAR_INPUTS: usize = 3;

const INIT_RANGE: f64 = 0.05;

/// Batches up to this size take the sparse row-streaming path instead of
/// GEMM. Results per sample do not depend on the batch size on this path.
const SMALL_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub filters: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub history: usize,
    pub actions: usize,
}

impl Architecture {
    pub fn pensieve_5g(actions: usize) -> Self {
        Self {
            filters: 320,
            kernel: 4,
            hidden: 320,
            history: 8,
            actions,
        }
    }

    /// Width used by the original 6-rung configuration.
    pub fn original(actions: usize) -> Self {
        Self {
            filters: 128,
            hidden: 128,
            ..Self::pensieve_5g(actions)
        }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.history + self.actions + SCALAR_INPUTS
    }

    pub fn merge_dim(&self) -> usize {
        self.filters * self.input_dim()
    }

    fn vector_lens(&self) -> [usize; 3] {
        [self.history, self.history, self.actions]
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 || self.kernel == 0 || self.hidden == 0 || self.history == 0 || self.actions < 2 {
            return Err(Error::Config(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    conv_w: [usize; 3],
    conv_b: [usize; 3],
    dense_w: [usize; SCALAR_INPUTS],
    dense_b: [usize; SCALAR_INPUTS],
    hidden_w: usize,
    hidden_b: usize,
    head_w: usize,
    head_b: usize,
    total: usize,
    tensors: Vec<(&'static str, Range<usize>)>,
}

impl Layout {
    fn new(arch: &Architecture, outputs: usize) -> Self {
        let f = arch.filters;
        let mut tensors = Vec::new();
        let mut at = 0;
        let mut take = |name: &'static str, n: usize| {
            let start = at;
            at += n;
            tensors.push((name, start..at));
            start
        };
        let names_w = ["conv_throughput.w", "conv_download.w", "conv_sizes.w"];
        let names_b = ["conv_throughput.b", "conv_download.b", "conv_sizes.b"];
        let mut conv_w = [0; 3];
        let mut conv_b = [0; 3];
        for v in 0..3 {
            conv_w[v] = take(names_w[v], f * arch.kernel);
            conv_b[v] = take(names_b[v], f);
        }
        let names_w = ["dense_buffer.w", "dense_remaining.w", "dense_last.w"];
        let names_b = ["dense_buffer.b", "dense_remaining.b", "dense_last.b"];
        let mut dense_w = [0; SCALAR_INPUTS];
        let mut dense_b = [0; SCALAR_INPUTS];
        for s in 0..SCALAR_INPUTS {
            dense_w[s] = take(names_w[s], f);
            dense_b[s] = take(names_b[s], f);
        }
        let hidden_w = take("hidden.w", arch.merge_dim() * arch.hidden);
        let hidden_b = take("hidden.b", arch.hidden);
        let head_w = take("head.w", arch.hidden * outputs);
        let head_b = take("head.b", outputs);
        Self {
            conv_w,
            conv_b,
            dense_w,
            dense_b,
            hidden_w,
            hidden_b,
            head_w,
            head_b,
            total: at,
            tensors,
        }
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    pub batch: usize,
    /// Merged post-ReLU features, `batch × merge_dim`.
    pub merged: Vec<T>,
    /// Hidden post-ReLU activations, `batch × hidden`.
    pub hidden: Vec<T>,
    /// Head outputs before any softmax, `batch × outputs`.
    pub out: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    arch: Architecture,
    outputs: usize,
    layout: Layout,
    params: Vec<T>,
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

impl<T: Real> Network<T> {
    pub fn zeros(arch: Architecture, outputs: usize) -> Self {
        let layout = Layout::new(&arch, outputs);
        Self {
            arch,
            outputs,
            params: vec![T::zero(); layout.total],
            layout,
        }
    }

    /// Uniform initialisation in ±0.05.
    pub fn init<R: Rng>(arch: Architecture, outputs: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch, outputs);
        for p in &mut net.params {
            *p = T::lit(rng.random_range(-INIT_RANGE..INIT_RANGE));
        }
        net
    }

    pub fn from_params(arch: Architecture, outputs: usize, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(arch, outputs);
        if params.len() != net.params.len() {
            return Err(Error::Checkpoint(format!(
                "parameter count {} does not match architecture ({})",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Named parameter tensors as ranges into [`Network::params`].
    pub fn tensors(&self) -> &[(&'static str, Range<usize>)] {
        &self.layout.tensors
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn convert<U: Real>(&self) -> Network<U> {
        Network {
            arch: self.arch,
            outputs: self.outputs,
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::lit(p.as_f64())).collect(),
        }
    }

    fn merge_one(&self, x: &[T], z: &mut [T]) {
        let a = &self.arch;
        let f = a.filters;
        let k = a.kernel;
        let pad = (k - 1) / 2;
        let lens = a.vector_lens();
        let mut x_at = 0;
        let mut z_at = 0;
        for v in 0..3 {
            let len = lens[v];
            let xs = &x[x_at..x_at + len];
            let w = &self.params[self.layout.conv_w[v]..self.layout.conv_w[v] + f * k];
            let b = &self.params[self.layout.conv_b[v]..self.layout.conv_b[v] + f];
            for fi in 0..f {
                let wf = &w[fi * k..(fi + 1) * k];
                for p in 0..len {
                    let mut acc = b[fi];
                    for (ki, &wk) in wf.iter().enumerate() {
                        let idx = p + ki;
                        if idx >= pad && idx - pad < len {
                            acc = acc + wk * xs[idx - pad];
                        }
                    }
                    z[z_at + fi * len + p] = relu(acc);
                }
            }
            x_at += len;
            z_at += f * len;
        }
        for s in 0..SCALAR_INPUTS {
            let xv = x[x_at + s];
            let w = &self.params[self.layout.dense_w[s]..self.layout.dense_w[s] + f];
            let b = &self.params[self.layout.dense_b[s]..self.layout.dense_b[s] + f];
            for fi in 0..f {
                z[z_at + fi] = relu(w[fi] * xv + b[fi]);
            }
            z_at += f;
        }
    }

    /// Forward pass over `batch` rows of `inputs`.
    pub fn forward(&self, inputs: &[T], batch: usize) -> Cache<T> {
        let d = self.arch.input_dim();
        let m = self.arch.merge_dim();
        let hd = self.arch.hidden;
        let o = self.outputs;
        assert_eq!(inputs.len(), batch * d, "input rows");
        let mut merged = vec![T::zero(); batch * m];
        for b in 0..batch {
            self.merge_one(&inputs[b * d..(b + 1) * d], &mut merged[b * m..(b + 1) * m]);
        }
        let wh = &self.params[self.layout.hidden_w..self.layout.hidden_w + m * hd];
        let bh = &self.params[self.layout.hidden_b..self.layout.hidden_b + hd];
        let mut hidden = vec![T::zero(); batch * hd];
        for row in hidden.chunks_mut(hd) {
            row.copy_from_slice(bh);
        }
        if batch <= SMALL_BATCH {
            for b in 0..batch {
                let z = &merged[b * m..(b + 1) * m];
                let h = &mut hidden[b * hd..(b + 1) * hd];
                for (ki, &zk) in z.iter().enumerate() {
                    if zk != T::zero() {
                        let w = &wh[ki * hd..(ki + 1) * hd];
                        for (hj, &wj) in h.iter_mut().zip(w) {
                            *hj = *hj + zk * wj;
                        }
                    }
                }
            }
        } else {
            gemm(Mat::new(&merged, batch, m), Mat::new(wh, m, hd), &mut hidden, T::one());
        }
        for h in &mut hidden {
            *h = relu(*h);
        }
        let wo = &self.params[self.layout.head_w..self.layout.head_w + hd * o];
        let bo = &self.params[self.layout.head_b..self.layout.head_b + o];
        let mut out = vec![T::zero(); batch * o];
        for b in 0..batch {
            let h = &hidden[b * hd..(b + 1) * hd];
            let y = &mut out[b * o..(b + 1) * o];
            y.copy_from_slice(bo);
            for (j, &hj) in h.iter().enumerate() {
                if hj != T::zero() {
                    for (yo, &w) in y.iter_mut().zip(&wo[j * o..(j + 1) * o]) {
                        *yo = *yo + hj * w;
                    }
                }
            }
        }
        Cache {
            batch,
            merged,
            hidden,
            out,
        }
    }

    /// Accumulates into `grad` the gradient of `Σ d_out · out` with respect
    /// to every parameter.
    pub fn backward(&self, inputs: &[T], cache: &Cache<T>, d_out: &[T], grad: &mut [T]) {
        let batch = cache.batch;
        let a = &self.arch;
        let d = a.input_dim();
        let m = a.merge_dim();
        let hd = a.hidden;
        let o = self.outputs;
        let f = a.filters;
        let k = a.kernel;
        let l = &self.layout;
        assert_eq!(grad.len(), self.params.len());
        assert_eq!(d_out.len(), batch * o);

        // head
        let wo = &self.params[l.head_w..l.head_w + hd * o];
        let mut dh = vec![T::zero(); batch * hd];
        for b in 0..batch {
            let h = &cache.hidden[b * hd..(b + 1) * hd];
            let g = &d_out[b * o..(b + 1) * o];
            for (oi, &go) in g.iter().enumerate() {
                grad[l.head_b + oi] = grad[l.head_b + oi] + go;
            }
            for j in 0..hd {
                if h[j] == T::zero() {
                    continue;
                }
                let mut acc = T::zero();
                for oi in 0..o {
                    let gw = &mut grad[l.head_w + j * o + oi];
                    *gw = *gw + h[j] * g[oi];
                    acc = acc + g[oi] * wo[j * o + oi];
                }
                dh[b * hd + j] = acc;
            }
        }

        // hidden layer
        for b in 0..batch {
            for j in 0..hd {
                grad[l.hidden_b + j] = grad[l.hidden_b + j] + dh[b * hd + j];
            }
        }
        let wh = &self.params[l.hidden_w..l.hidden_w + m * hd];
        let mut dz = vec![T::zero(); batch * m];
        if batch <= SMALL_BATCH {
            let gwh = &mut grad[l.hidden_w..l.hidden_w + m * hd];
            for b in 0..batch {
                let z = &cache.merged[b * m..(b + 1) * m];
                let g = &dh[b * hd..(b + 1) * hd];
                for (ki, &zk) in z.iter().enumerate() {
                    if zk == T::zero() {
                        continue;
                    }
                    let row = &mut gwh[ki * hd..(ki + 1) * hd];
                    let w = &wh[ki * hd..(ki + 1) * hd];
                    let mut acc = T::zero();
                    for j in 0..hd {
                        row[j] = row[j] + zk * g[j];
                        acc = acc + g[j] * w[j];
                    }
                    dz[b * m + ki] = acc;
                }
            }
        } else {
            gemm(
                Mat::new(&cache.merged, batch, m).t(),
                Mat::new(&dh, batch, hd),
                &mut grad[l.hidden_w..l.hidden_w + m * hd],
                T::one(),
            );
            gemm(Mat::new(&dh, batch, hd), Mat::new(wh, m, hd).t(), &mut dz, T::zero());
            for (g, &z) in dz.iter_mut().zip(&cache.merged) {
                if z == T::zero() {
                    *g = T::zero();
                }
            }
        }

        // input banks
        let pad = (k - 1) / 2;
        let lens = a.vector_lens();
        for b in 0..batch {
            let x = &inputs[b * d..(b + 1) * d];
            let g = &dz[b * m..(b + 1) * m];
            let mut x_at = 0;
            let mut z_at = 0;
            for v in 0..3 {
                let len = lens[v];
                let xs = &x[x_at..x_at + len];
                for fi in 0..f {
                    for p in 0..len {
                        let gz = g[z_at + fi * len + p];
                        if gz == T::zero() {
                            continue;
                        }
                        grad[l.conv_b[v] + fi] = grad[l.conv_b[v] + fi] + gz;
                        for ki in 0..k {
                            let idx = p + ki;
                            if idx >= pad && idx - pad < len {
                                let gw = &mut grad[l.conv_w[v] + fi * k + ki];
                                *gw = *gw + gz * xs[idx - pad];
                            }
                        }
                    }
                }
                x_at += len;
                z_at += f * len;
            }
            for s in 0..SCALAR_INPUTS {
                let xv = x[x_at + s];
                for fi in 0..f {
                    let gz = g[z_at + fi];
                    if gz != T::zero() {
                        grad[l.dense_w[s] + fi] = grad[l.dense_w[s] + fi] + gz * xv;
                        grad[l.dense_b[s] + fi] = grad[l.dense_b[s] + fi] + gz;
                    }
                }
                z_at += f;
            }
        }
    }
}

/// Numerically stable softmax of one row.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy<T: Real>(probs: &[T]) -> T {
    probs
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| -p * p.ln())
        .sum()
}

/// Actor and critic: two networks with identical trunks.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic<T> {
    pub actor: Network<T>,
    pub critic: Network<T>,
}

impl<T: Real> ActorCritic<T> {
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Network::init(arch, arch.actions, &mut rng);
        let critic = Network::init(arch, 1, &mut rng);
        Self { actor, critic }
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self {
            actor: Network::zeros(arch, arch.actions),
            critic: Network::zeros(arch, 1),
        }
    }

    pub fn architecture(&self) -> &Architecture {
        self.actor.architecture()
    }

    /// Action distribution and value for one normalised bundle.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, f64)> {
        if !(self.actor.all_finite() && self.critic.all_finite()) {
            return Err(Error::NumericalFault("non-finite network parameter".into()));
        }
        let arch = self.architecture();
        if input.len() != arch.input_dim() {
            return Err(Error::NumericalFault(format!(
                "input has {} features, network expects {}",
                input.len(),
                arch.input_dim()
            )));
        }
        let x: Vec<T> = input.iter().map(|&v| T::lit(v)).collect();
        let logits = self.actor.forward(&x, 1).out;
        let value = self.critic.forward(&x, 1).out[0];
        let probs = softmax(&logits).into_iter().map(Real::as_f64).collect();
        Ok((probs, value.as_f64()))
    }
}
