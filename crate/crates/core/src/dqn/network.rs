//! Fully connected ReLU network with hand-written backprop and Adam.
//!
//! Parameters live in one flat vector. Layer `l` maps `sizes[l]` inputs to
//! `sizes[l+1]` outputs and is stored as its weight block (input-major,
//! `w[i * outputs + o]`) followed by its bias. Hidden layers use ReLU, the
//! output layer is linear.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DqnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    inputs: usize,
    outputs: usize,
    weight: usize,
    bias: usize,
}

fn spans(sizes: &[usize]) -> Vec<LayerSpan> {
    let mut offset = 0;
    sizes
        .windows(2)
        .map(|w| {
            let span = LayerSpan {
                inputs: w[0],
                outputs: w[1],
                weight: offset,
                bias: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            span
        })
        .collect()
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Per-layer outputs kept for the backward pass; `values[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    values: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output layer");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn random<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for span in spans(sizes) {
            let bound = 1.0 / (span.inputs as f64).sqrt();
            let end = span.bias + span.outputs;
            for p in &mut net.params[span.weight..end] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, DqnError> {
        if sizes.len() < 2 || params.len() != param_count(sizes) {
            return Err(DqnError::Shape(format!(
                "{} parameters do not fit layer sizes {sizes:?}",
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Activations::default();
        self.forward_into(x, &mut acts);
        acts.values.pop().unwrap_or_default()
    }

    pub fn forward_into(&self, x: &[f64], acts: &mut Activations) {
        let layers = spans(&self.sizes);
        acts.values.resize_with(layers.len() + 1, Vec::new);
        acts.values[0].clear();
        acts.values[0].extend_from_slice(x);
        for (l, span) in layers.iter().enumerate() {
            let (done, rest) = acts.values.split_at_mut(l + 1);
            let input = &done[l];
            let out = &mut rest[0];
            out.clear();
            out.extend_from_slice(&self.params[span.bias..span.bias + span.outputs]);
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &self.params[span.weight + i * span.outputs..][..span.outputs];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
            if l + 1 < layers.len() {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }

    /// Accumulates `d(output . grad_out)/d(params)` into `grad`.
    pub fn backward(&self, acts: &Activations, grad_out: &[f64], grad: &mut [f64]) {
        let layers = spans(&self.sizes);
        let mut g = grad_out.to_vec();
        for (l, span) in layers.iter().enumerate().rev() {
            let input = &acts.values[l];
            for (gb, go) in grad[span.bias..span.bias + span.outputs].iter_mut().zip(&g) {
                *gb += go;
            }
            for (i, &xi) in input.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut grad[span.weight + i * span.outputs..][..span.outputs];
                for (gw, go) in row.iter_mut().zip(&g) {
                    *gw += xi * go;
                }
            }
            if l == 0 {
                break;
            }
            let mut gx = vec![0.0; span.inputs];
            for (i, gxi) in gx.iter_mut().enumerate() {
                // ReLU: zero output means the unit was inactive.
                if input[i] > 0.0 {
                    let row = &self.params[span.weight + i * span.outputs..][..span.outputs];
                    *gxi = row.iter().zip(&g).map(|(w, go)| w * go).sum();
                }
            }
            g = gx;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: usize) -> Self {
        Self {
            config,
            t: 0,
            m: vec![0.0; params],
            v: vec![0.0; params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_offsets() {
        assert_eq!(param_count(&[5, 64, 64, 2]), 5 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2);
        let s = spans(&[3, 4, 2]);
        assert_eq!((s[0].weight, s[0].bias), (0, 12));
        assert_eq!((s[1].weight, s[1].bias), (16, 24));
    }

    #[test]
    fn tiny_net_by_hand() {
        // 2 -> 1 -> 1: h = relu(0.5 x0 - 2 x1 + 0.1), y = 3 h - 1
        let net = Mlp::from_params(&[2, 1, 1], vec![0.5, -2.0, 0.1, 3.0, -1.0]).unwrap();
        // h = relu(0.5*4 - 2*0.25 + 0.1) = 1.6, y = 3.8
        assert!((net.forward(&[4.0, 0.25])[0] - 3.8).abs() < 1e-15);
        // h = relu(0.5 - 4 + 0.1) = 0, y = -1
        assert_eq!(net.forward(&[1.0, 2.0])[0], -1.0);
    }

    #[test]
    fn random_init_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::random(&[4, 16, 2], &mut rng);
        let s = spans(net.sizes());
        assert!(net.params()[..s[1].weight].iter().all(|p| p.abs() <= 0.5));
        assert!(net.params()[s[1].weight..].iter().all(|p| p.abs() <= 0.25));
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut params = vec![1.0, -2.0, 3.0];
        let mut adam = Adam::new(AdamConfig::default(), 3);
        adam.step(&mut params, &[0.0; 3], 1e-3);
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With bias correction the first update is lr * g / (|g| + eps).
        let mut params = vec![0.0, 0.0];
        let mut adam = Adam::new(AdamConfig::default(), 2);
        adam.step(&mut params, &[4.0, -0.5], 0.1);
        assert!((params[0] + 0.1).abs() < 1e-8);
        assert!((params[1] - 0.1).abs() < 1e-7);
    }
}
