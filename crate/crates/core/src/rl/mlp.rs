//! Fully connected network over a flat parameter vector, with reverse-mode
//! gradients and an Adam optimiser.

use super::RlError;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// ReLU hidden layers and an identity output layer. Layer `l` stores its
/// weights row-major (`out x in`) followed by its biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs and pre-activations from one forward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `inputs[l]` feeds layer `l`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().map_or(&[], |v| v.as_slice())
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "need input and output sizes");
        Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// He-uniform hidden weights, output weights scaled down by 100, zero biases.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Mlp::zeros(sizes);
        let layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let mut bound = (6.0 / fan_in as f64).sqrt();
            if l + 1 == layers {
                bound *= 0.01;
            }
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self, RlError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(RlError::Architecture(format!("bad layer sizes {sizes:?}")));
        }
        if params.len() != param_count(&sizes) {
            return Err(RlError::DimensionMismatch {
                expected: param_count(&sizes),
                got: params.len(),
            });
        }
        Ok(Mlp { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), RlError> {
        if x.len() != self.input_dim() {
            return Err(RlError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn layer(&self, l: usize, x: &[f64], out: &mut Vec<f64>, off: usize) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        let relu = l + 2 < self.sizes.len();
        out.clear();
        for j in 0..n_out {
            let row = &w[j * n_in..(j + 1) * n_in];
            let mut z = b[j];
            for (wi, xi) in row.iter().zip(x) {
                z += wi * xi;
            }
            out.push(if relu { z.max(0.0) } else { z });
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, RlError> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            self.layer(l, &cur, &mut next, off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache, RlError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.sizes.len());
        inputs.push(x.to_vec());
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            let mut out = Vec::with_capacity(self.sizes[l + 1]);
            self.layer(l, &inputs[l], &mut out, off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            inputs.push(out);
        }
        Ok(ForwardCache { inputs })
    }

    /// Adds d(loss)/d(params) to `grads`, given d(loss)/d(output).
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut [f64]) {
        assert_eq!(grad_out.len(), self.output_dim());
        assert_eq!(grads.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            // ReLU gate: the cached output of a hidden layer is zero exactly
            // where its pre-activation was non-positive.
            if l + 1 < layers {
                for (d, y) in delta.iter_mut().zip(&cache.inputs[l + 1]) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.inputs[l];
            let o = offsets[l];
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                let gw = &mut grads[o + j * n_in..o + (j + 1) * n_in];
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g += dj * xi;
                }
                grads[o + n_in * n_out + j] += dj;
            }
            if l > 0 {
                let w = &self.params[o..o + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for j in 0..n_out {
                    let dj = delta[j];
                    if dj == 0.0 {
                        continue;
                    }
                    for (p, wi) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                        *p += dj * wi;
                    }
                }
                delta = prev;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Rescales `grads` in place so its Euclidean norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}
