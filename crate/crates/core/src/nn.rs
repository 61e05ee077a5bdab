//! Multilayer perceptron and Adam optimizer, written from scratch.
//!
//! Parameters are stored as 32-bit floats (the checkpoint payload format and
//! the unit of bit-exact training resume); all arithmetic widens to f64 so
//! analytic gradients agree with central finite differences to high
//! precision. Hidden layers are rectified-linear, the output layer is
//! identity.
//!
//! Parameter layout: per layer, the weight matrix in output-major rows
//! (`w[out][in]`) followed by the bias vector.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f32>,
}

/// Activations recorded by [`Mlp::forward_cached`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation values per layer; the last entry is the output.
    post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("at least one layer")
    }
}

impl Mlp {
    pub fn param_count_for(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!(
                "layer sizes {layer_sizes:?} must name an input, an output, and no empty layers"
            )));
        }
        Ok(())
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; Self::param_count_for(layer_sizes)],
        })
    }

    /// He-uniform initialization: weights in `+-sqrt(6 / fan_in)`, zero biases.
    pub fn new_random(layer_sizes: &[usize], rng: &mut SeededRng) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        let mut params = Vec::with_capacity(Self::param_count_for(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-limit..limit) as f32);
            }
            for _ in 0..fan_out {
                params.push(0.0);
            }
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f32>) -> Result<Self> {
        Self::check_sizes(layer_sizes)?;
        let expected = Self::param_count_for(layer_sizes);
        if params.len() != expected {
            return Err(Error::Shape {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.post.pop().expect("at least one layer"))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_len() {
            return Err(Error::Shape {
                expected: self.input_len(),
                got: input.len(),
            });
        }
        let n_layers = self.layer_sizes.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut offset = 0usize;
        let mut activation: Vec<f64> = input.to_vec();
        for (k, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;

            let mut z = vec![0.0f64; n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut acc = biases[o] as f64;
                for (wi, xi) in row.iter().zip(&activation) {
                    acc += *wi as f64 * xi;
                }
                *zo = acc;
            }
            let a: Vec<f64> = if k + 1 < n_layers {
                z.iter().map(|&x| x.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            activation = a.clone();
            post.push(a);
        }
        Ok(ForwardCache {
            input: input.to_vec(),
            pre,
            post,
        })
    }

    /// Backpropagate `dL/d(output)` through the cached forward pass,
    /// returning `dL/d(params)` with the same layout as `params`.
    pub fn backward(&self, cache: &ForwardCache, dloss_doutput: &[f64]) -> Vec<f64> {
        let n_layers = self.layer_sizes.len() - 1;
        assert_eq!(dloss_doutput.len(), self.output_len(), "gradient length");

        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0usize;
        for w in self.layer_sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }

        let mut grads = vec![0.0f64; self.params.len()];
        let mut delta: Vec<f64> = dloss_doutput.to_vec();
        for k in (0..n_layers).rev() {
            let n_in = self.layer_sizes[k];
            let n_out = self.layer_sizes[k + 1];
            let base = offsets[k];
            let prev: &[f64] = if k == 0 { &cache.input } else { &cache.post[k - 1] };

            for o in 0..n_out {
                let d = delta[o];
                let wrow = base + o * n_in;
                for i in 0..n_in {
                    grads[wrow + i] += d * prev[i];
                }
                grads[base + n_in * n_out + o] += d;
            }

            if k > 0 {
                let mut prev_delta = vec![0.0f64; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    let wrow = base + o * n_in;
                    for (i, pd) in prev_delta.iter_mut().enumerate() {
                        *pd += self.params[wrow + i] as f64 * d;
                    }
                }
                // Gate through the previous layer's ReLU.
                for (pd, &z) in prev_delta.iter_mut().zip(&cache.pre[k - 1]) {
                    if z <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
        grads
    }
}

/// Adam with bias correction. Moments are stored as f32 alongside the
/// parameters, so checkpointed optimizer state round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u64,
}

impl Adam {
    pub fn new(param_count: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f64], learning_rate: f64) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient length");
        assert_eq!(params.len(), self.m.len(), "optimizer state length");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.m[i] as f64 + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.v[i] as f64 + (1.0 - self.beta2) * g * g;
            self.m[i] = m as f32;
            self.v[i] = v as f32;
            let m_hat = self.m[i] as f64 / bc1;
            let v_hat = self.v[i] as f64 / bc2;
            params[i] =
                (params[i] as f64 - learning_rate * m_hat / (v_hat.sqrt() + self.epsilon)) as f32;
        }
    }
}

/// Relative disagreement used by gradient checks:
/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn gradient_relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squared_error_loss(net: &Mlp, input: &[f64], target: &[f64]) -> f64 {
        let out = net.forward(input).unwrap();
        out.iter()
            .zip(target)
            .map(|(o, t)| 0.5 * (o - t) * (o - t))
            .sum()
    }

    fn analytic_gradient(net: &Mlp, input: &[f64], target: &[f64]) -> Vec<f64> {
        let cache = net.forward_cached(input).unwrap();
        let dout: Vec<f64> = cache
            .output()
            .iter()
            .zip(target)
            .map(|(o, t)| o - t)
            .collect();
        net.backward(&cache, &dout)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[5, 4, 3]).unwrap();
        let out = net.forward(&[1.0, -2.0, 3.0, 0.5, -0.1]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_blocks_give_a_linear_map() {
        // Hidden layer = identity on positive inputs, output layer a chosen
        // linear map.
        let mut net = Mlp::zeros(&[2, 2, 2]).unwrap();
        net.params[0] = 1.0; // hidden w[0][0]
        net.params[3] = 1.0; // hidden w[1][1]
        net.params[6] = 2.0; // out0 = 2*h0
        net.params[8] = 1.0; // out1 = h0 + 3*h1
        net.params[9] = 3.0;
        let out = net.forward(&[1.5, 0.25]).unwrap();
        assert_eq!(out, vec![3.0, 1.5 + 0.75]);
    }

    #[test]
    fn outputs_stay_finite_for_random_inputs_and_weights() {
        use rand::Rng;
        let mut rng = SeededRng::new(5, 0);
        for _ in 0..1000 {
            let net = Mlp::new_random(&[6, 8, 3], &mut rng).unwrap();
            let input: Vec<f64> = (0..6).map(|_| rng.random_range(-10.0..10.0)).collect();
            let out = net.forward(&input).unwrap();
            assert!(out.iter().all(|x| x.is_finite()));
            assert_eq!(out.len(), 3);
        }
    }

    #[test]
    fn wrong_input_length_is_a_shape_error() {
        let net = Mlp::zeros(&[4, 3]).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn analytic_gradients_match_central_finite_differences() {
        use rand::Rng;
        let mut rng = SeededRng::new(314, 0);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let net = Mlp::new_random(&[3, 2, 3], &mut rng).unwrap();
            let input: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let target: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let analytic = analytic_gradient(&net, &input, &target);

            let h = 2f32.powi(-12);
            for p in 0..net.params.len() {
                let mut plus = net.clone();
                plus.params[p] += h;
                let mut minus = net.clone();
                minus.params[p] -= h;
                // Use the realized f32 step as the denominator.
                let dp = plus.params[p] as f64 - minus.params[p] as f64;
                let fd = (squared_error_loss(&plus, &input, &target)
                    - squared_error_loss(&minus, &input, &target))
                    / dp;
                let rel = gradient_relative_error(analytic[p], fd);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut rng = SeededRng::new(2, 0);
        let mut net = Mlp::new_random(&[3, 4, 2], &mut rng).unwrap();
        let before = net.params.clone();
        let grads = vec![1.0; net.params.len()];
        let mut adam = Adam::new(net.params.len());
        adam.step(&mut net.params, &grads, 0.0);
        assert_eq!(net.params, before);
    }

    #[test]
    fn single_sample_overfit_shrinks_loss() {
        let mut rng = SeededRng::new(7, 0);
        let mut net = Mlp::new_random(&[4, 8, 2], &mut rng).unwrap();
        let input = [0.3, -0.7, 1.1, 0.05];
        let target = [1.5, -0.5];
        let initial = squared_error_loss(&net, &input, &target);
        let mut adam = Adam::new(net.params.len());
        for _ in 0..100 {
            let grads = analytic_gradient(&net, &input, &target);
            adam.step(&mut net.params, &grads, 0.05);
        }
        let final_loss = squared_error_loss(&net, &input, &target);
        assert!(
            final_loss <= initial / 10.0,
            "loss went {initial} -> {final_loss}"
        );
    }
}
