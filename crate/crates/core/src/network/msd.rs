//! Mixed-Scale Dense network.
//!
//! Hidden layer `i` (0-based) produces a single channel from the input image
//! and every earlier hidden output, using a 3×3 kernel with dilation
//! `(i mod p) + 1` followed by ReLU. The output layer is a 1×1 convolution
//! over all `depth + 1` channels followed by `tanh`.
//!
//! Parameters live in one flat vector, in checkpoint order: hidden layers
//! `0..depth`, each as weights `(channel, ky, kx)` then bias, then the output
//! weights and bias.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::conv::{accumulate, accumulate_adjoint, ConvKernel};
use super::Real;
use crate::error::{Error, Result};
use crate::geometry::Image;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Number of trainable parameters of a `(depth, ·)` network.
pub fn parameter_count(depth: usize) -> usize {
    // Σ_i (9(i+1) + 1) over hidden layers, plus (depth + 1) + 1 for the output.
    9 * depth * (depth + 1) / 2 + depth + (depth + 1) + 1
}

#[derive(Debug, Clone)]
pub struct MsdNetwork<T> {
    depth: usize,
    dilation_modulus: usize,
    params: Vec<T>,
    /// Start of each hidden layer's block in `params`; the last entry is the output layer.
    offsets: Vec<usize>,
    version: u64,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    version: u64,
    size: usize,
    /// Input followed by every hidden output, each `size²`.
    channels: Vec<T>,
    output: Vec<T>,
}

impl<T> Tape<T> {
    pub fn output(&self) -> &[T] {
        &self.output
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Channel `c` of the dense stack: 0 is the input, `i + 1` is hidden layer `i`.
    pub fn channel(&self, c: usize) -> &[T] {
        let nn = self.size * self.size;
        &self.channels[c * nn..(c + 1) * nn]
    }
}

impl<T: Real> MsdNetwork<T> {
    /// A network with every weight and bias set to zero.
    pub fn zeros(depth: usize, dilation_modulus: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidInput(
                "network depth must be at least 1".into(),
            ));
        }
        if dilation_modulus == 0 {
            return Err(Error::InvalidInput(
                "dilation modulus p must be at least 1".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(depth + 1);
        let mut at = 0;
        for i in 0..depth {
            offsets.push(at);
            at += 9 * (i + 1) + 1;
        }
        offsets.push(at);
        at += depth + 2;
        debug_assert_eq!(at, parameter_count(depth));
        Ok(MsdNetwork {
            depth,
            dilation_modulus,
            params: vec![T::zero(); at],
            offsets,
            version: fresh_version(),
        })
    }

    /// Builds a network from a flat parameter vector in checkpoint order.
    pub fn from_params(depth: usize, dilation_modulus: usize, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(depth, dilation_modulus)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "depth {depth} needs {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    /// Every parameter drawn i.i.d. from `U[lo, hi)` with a seeded generator.
    pub fn init_uniform(&mut self, lo: f64, hi: f64, seed: u64) -> Result<()> {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!(
                "empty init range [{lo}, {hi})"
            )));
        }
        let dist = Uniform::new(lo, hi).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in self.params_mut() {
            *p = T::from(dist.sample(&mut rng)).expect("f64 converts");
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dilation_modulus(&self) -> usize {
        self.dilation_modulus
    }

    pub fn dilation(&self, layer: usize) -> usize {
        layer % self.dilation_modulus + 1
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [T] {
        self.version = fresh_version();
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Identifier of the current parameter values; changes on every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Range of hidden layer `i` (weights then bias) in the flat vector.
    pub fn hidden_range(&self, layer: usize) -> std::ops::Range<usize> {
        self.offsets[layer]..self.offsets[layer] + 9 * (layer + 1) + 1
    }

    /// Range of the output layer (weights then bias).
    pub fn output_range(&self) -> std::ops::Range<usize> {
        self.offsets[self.depth]..self.params.len()
    }

    pub fn hidden_kernel(&self, layer: usize) -> ConvKernel<T> {
        let r = self.hidden_range(layer);
        let block = &self.params[r];
        let (w, b) = block.split_at(block.len() - 1);
        ConvKernel {
            weights: w.to_vec(),
            bias: b[0],
            dilation: self.dilation(layer),
        }
    }

    /// Forward pass over an `n × n` input, recording activations.
    pub fn forward(&self, input: &[T], n: usize) -> Result<Tape<T>> {
        let nn = n * n;
        if input.len() != nn {
            return Err(Error::DimensionMismatch(format!(
                "input has {} values, expected {n}×{n}",
                input.len()
            )));
        }
        let mut channels = Vec::with_capacity((self.depth + 1) * nn);
        channels.extend_from_slice(input);
        for layer in 0..self.depth {
            let block = &self.params[self.hidden_range(layer)];
            let (w, b) = block.split_at(block.len() - 1);
            let dilation = self.dilation(layer);
            let mut pre = vec![b[0]; nn];
            for (c, wc) in w.chunks_exact(9).enumerate() {
                accumulate(&mut pre, &channels[c * nn..(c + 1) * nn], n, wc, dilation);
            }
            channels.extend(pre.into_iter().map(|v| v.max(T::zero())));
        }
        let out_block = &self.params[self.output_range()];
        let (w, b) = out_block.split_at(out_block.len() - 1);
        let mut output = vec![b[0]; nn];
        for (c, &wc) in w.iter().enumerate() {
            if wc == T::zero() {
                continue;
            }
            for (o, &v) in output.iter_mut().zip(&channels[c * nn..(c + 1) * nn]) {
                *o += wc * v;
            }
        }
        // Keep the output strictly inside (−1, 1) even where tanh rounds to ±1.
        let bound = T::one() - T::epsilon();
        for o in &mut output {
            *o = o.tanh().max(-bound).min(bound);
        }
        Ok(Tape {
            version: self.version,
            size: n,
            channels,
            output,
        })
    }

    /// Reverse pass: gradient of the loss with respect to every parameter,
    /// in the flat layout, given `∂L/∂output`.
    pub fn backward(&self, tape: &Tape<T>, output_grad: &[T]) -> Result<Vec<T>> {
        if tape.version != self.version {
            return Err(Error::StaleTape {
                recorded: tape.version,
                current: self.version,
            });
        }
        let n = tape.size;
        let nn = n * n;
        if output_grad.len() != nn || tape.channels.len() != (self.depth + 1) * nn {
            return Err(Error::DimensionMismatch(
                "output gradient does not match the tape".into(),
            ));
        }
        let mut grads = vec![T::zero(); self.params.len()];
        // ∂L/∂channel for hidden channels 1..=depth; the input needs none.
        let mut chan_grad = vec![T::zero(); (self.depth + 1) * nn];

        let pre_out: Vec<T> = output_grad
            .iter()
            .zip(&tape.output)
            .map(|(&g, &o)| g * (T::one() - o * o))
            .collect();
        let out_r = self.output_range();
        let out_w = &self.params[out_r.start..out_r.end - 1];
        for c in 0..=self.depth {
            let ch = tape.channel(c);
            grads[out_r.start + c] = pre_out
                .iter()
                .zip(ch)
                .fold(T::zero(), |a, (&g, &v)| a + g * v);
            if c > 0 && out_w[c] != T::zero() {
                for (d, &g) in chan_grad[c * nn..(c + 1) * nn].iter_mut().zip(&pre_out) {
                    *d += out_w[c] * g;
                }
            }
        }
        grads[out_r.end - 1] = pre_out.iter().fold(T::zero(), |a, &g| a + g);

        for layer in (0..self.depth).rev() {
            let c_out = layer + 1;
            let act = tape.channel(c_out);
            let g_pre: Vec<T> = chan_grad[c_out * nn..(c_out + 1) * nn]
                .iter()
                .zip(act)
                .map(|(&g, &a)| if a > T::zero() { g } else { T::zero() })
                .collect();
            let r = self.hidden_range(layer);
            grads[r.end - 1] = g_pre.iter().fold(T::zero(), |a, &g| a + g);
            if g_pre.iter().all(|&g| g == T::zero()) {
                continue;
            }
            let dilation = self.dilation(layer);
            let w = &self.params[r.start..r.end - 1];
            for c in 0..=layer {
                let grad_in = (c > 0).then(|| &mut chan_grad[c * nn..(c + 1) * nn]);
                accumulate_adjoint(
                    &g_pre,
                    tape.channel(c),
                    n,
                    &w[9 * c..9 * c + 9],
                    dilation,
                    &mut grads[r.start + 9 * c..r.start + 9 * c + 9],
                    grad_in,
                );
            }
        }
        Ok(grads)
    }
}

impl MsdNetwork<f32> {
    /// Network output for an image (the predicted residual).
    pub fn apply(&self, image: &Image) -> Image {
        let tape = self
            .forward(image.as_slice(), image.size())
            .expect("image is square by construction");
        Image::from_vec(image.size(), tape.output).expect("tanh output is finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_closed_form() {
        for d in 1..20 {
            let net = MsdNetwork::<f32>::zeros(d, 10).unwrap();
            let brute: usize = (0..d).map(|i| 9 * (i + 1) + 1).sum::<usize>() + d + 2;
            assert_eq!(net.n_params(), brute);
            assert_eq!(parameter_count(d), brute);
        }
        assert_eq!(parameter_count(51), 9 * 51 * 52 / 2 + 51 + 53);
    }

    #[test]
    fn dilation_schedule_cycles_with_p() {
        let net = MsdNetwork::<f32>::zeros(25, 10).unwrap();
        let d: Vec<usize> = (0..25).map(|i| net.dilation(i)).collect();
        assert_eq!(&d[..12], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 1, 2]);
        assert_eq!(d[20], 1);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = MsdNetwork::<f64>::zeros(4, 3).unwrap();
        let input: Vec<f64> = (0..36).map(|v| v as f64).collect();
        let tape = net.forward(&input, 6).unwrap();
        assert!(tape.output().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut net = MsdNetwork::<f64>::zeros(2, 2).unwrap();
        net.init_uniform(-0.25, 0.25, 1).unwrap();
        let tape = net.forward(&[0.5; 16], 4).unwrap();
        net.params_mut()[0] += 1.0;
        assert!(matches!(
            net.backward(&tape, &[1.0; 16]),
            Err(Error::StaleTape { .. })
        ));
        let other = net.clone();
        let tape = other.forward(&[0.5; 16], 4).unwrap();
        assert!(net.backward(&tape, &[1.0; 16]).is_ok());
    }

    #[test]
    fn zero_loss_gradient_gives_zero_gradients() {
        let mut net = MsdNetwork::<f64>::zeros(3, 3).unwrap();
        net.init_uniform(-0.25, 0.25, 9).unwrap();
        let tape = net.forward(&[0.3; 64], 8).unwrap();
        let g = net.backward(&tape, &[0.0; 64]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_deterministic_and_in_range() {
        let mut a = MsdNetwork::<f32>::zeros(5, 10).unwrap();
        let mut b = MsdNetwork::<f32>::zeros(5, 10).unwrap();
        a.init_uniform(-0.25, 0.25, 42).unwrap();
        b.init_uniform(-0.25, 0.25, 42).unwrap();
        assert_eq!(a.params(), b.params());
        assert!(a.params().iter().all(|&p| (-0.25..0.25).contains(&p)));
        assert!(a.init_uniform(0.1, 0.1, 0).is_err());
    }
}
