//! Multilayer perceptrons on the tape and the optimizers that update them.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var, DEFAULT_LEAKY_SLOPE};

/// Fully connected network with Leaky-ReLU between layers and raw outputs.
///
/// Weights are stored `fan_in × fan_out` so a batch `X[b×fan_in]` maps to
/// `X·W + 1·b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<Tensor>,
}

/// Parameter handles of an [`Mlp`] recorded on one tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    vars: Vec<Var>,
}

impl BoundMlp {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl Mlp {
    /// Uniform(±1/√fan_in) initialization for weights and biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Topology(format!(
                "layer sizes must have at least two positive entries, got {sizes:?}"
            )));
        }
        let mut params = Vec::with_capacity(2 * (sizes.len() - 1));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let s = 1.0 / (fan_in as f64).sqrt();
            let weight = (0..fan_in * fan_out).map(|_| rng.random_range(-s..s)).collect();
            let bias = (0..fan_out).map(|_| rng.random_range(-s..s)).collect();
            params.push(Tensor::matrix(fan_in, fan_out, weight)?);
            params.push(Tensor::matrix(1, fan_out, bias)?);
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// Rebuilds a network from stored parameters, checking every shape.
    pub fn from_params(sizes: &[usize], params: Vec<Tensor>) -> Result<Self> {
        if sizes.len() < 2 || params.len() != 2 * (sizes.len() - 1) {
            return Err(Error::Topology(format!(
                "{} tensors do not fit layer sizes {sizes:?}",
                params.len()
            )));
        }
        for (l, w) in sizes.windows(2).enumerate() {
            if params[2 * l].shape() != [w[0], w[1]] || params[2 * l + 1].shape() != [1, w[1]] {
                return Err(Error::Topology(format!("layer {l} has wrong shapes")));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Last layer's weight and bias, the score-producing affine map.
    pub fn output_layer_mut(&mut self) -> (&mut Tensor, &mut Tensor) {
        let n = self.params.len();
        let (w, b) = self.params[n - 2..].split_at_mut(1);
        (&mut w[0], &mut b[0])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(Tensor::is_finite)
    }

    /// Records the parameters as leaves. `trainable = false` records them
    /// as constants, which freezes this network for the pass.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundMlp {
        BoundMlp {
            vars: self
                .params
                .iter()
                .map(|p| tape.leaf(p.clone(), trainable))
                .collect(),
        }
    }

    /// Forward pass using previously bound parameters.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundMlp, x: Var) -> Result<Var> {
        let rows = tape.value(x).rows();
        let ones = tape.constant(Tensor::filled(&[rows, 1], 1.0));
        let mut h = x;
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let xw = tape.matmul(h, bound.vars[2 * l])?;
            let b = tape.matmul(ones, bound.vars[2 * l + 1])?;
            h = tape.add(xw, b)?;
            if l + 1 < layers {
                h = tape.leaky_relu(h, DEFAULT_LEAKY_SLOPE);
            }
        }
        Ok(h)
    }

    /// Forward pass on plain values; no tape is involved.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let layers = self.sizes.len() - 1;
        let mut h = x.clone();
        for l in 0..layers {
            let mut out = h.matmul(&self.params[2 * l])?;
            let bias = self.params[2 * l + 1].data();
            let n = bias.len();
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                *v += bias[i % n];
            }
            if l + 1 < layers {
                out = out.map(|v| if v > 0.0 { v } else { DEFAULT_LEAKY_SLOPE * v });
            }
            h = out;
        }
        Ok(h)
    }

    /// Gradients of the bound parameters after `tape.backward`, zeros for
    /// anything the pass did not reach.
    pub fn grads(&self, tape: &Tape, bound: &BoundMlp) -> Vec<Vec<f64>> {
        bound
            .vars
            .iter()
            .zip(&self.params)
            .map(|(&v, p)| {
                tape.grad_slice(v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; p.len()])
            })
            .collect()
    }
}

/// Scales every gradient so that their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-6);
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// Stochastic gradient descent with (optionally Nesterov) momentum and L2
/// weight decay folded into the gradient:
///
/// ```text
/// g ← g + wd·p
/// v ← μ·v + g
/// p ← p − lr·(g + μ·v)   (Nesterov)   or   p ← p − lr·v
/// ```
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub weight_decay: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, nesterov: bool, weight_decay: f64) -> Self {
        Self {
            lr,
            momentum,
            nesterov,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                let d = gi + self.weight_decay * *w;
                *vi = self.momentum * *vi + d;
                let step = if self.nesterov {
                    d + self.momentum * *vi
                } else {
                    *vi
                };
                *w -= self.lr * step;
            }
        }
    }
}

/// Adam with bias correction, minimizing.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                *w -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn predict_matches_tape_forward() {
        let mut r = rng::seeded(3);
        let net = Mlp::new(&[3, 5, 2], &mut r).unwrap();
        let x = Tensor::matrix(4, 3, (0..12).map(|i| i as f64 * 0.1 - 0.5).collect()).unwrap();
        let mut tape = Tape::new();
        let b = net.bind(&mut tape, true);
        let xv = tape.constant(x.clone());
        let y = net.forward(&mut tape, &b, xv).unwrap();
        let direct = net.predict(&x).unwrap();
        for (a, b) in tape.value(y).data().iter().zip(direct.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = Mlp::new(&[4, 8, 3], &mut rng::seeded(1)).unwrap();
        let b = Mlp::new(&[4, 8, 3], &mut rng::seeded(1)).unwrap();
        assert_eq!(a, b);
        assert!(a.params()[0].data().iter().all(|v| v.abs() <= 0.5));
        assert!(a.params()[2].data().iter().all(|v| v.abs() <= 1.0 / 8f64.sqrt()));
        assert_eq!(a.num_params(), 4 * 8 + 8 + 8 * 3 + 3);
    }

    #[test]
    fn rejects_bad_topology() {
        assert!(Mlp::new(&[3], &mut rng::seeded(0)).is_err());
        assert!(Mlp::new(&[3, 0, 1], &mut rng::seeded(0)).is_err());
        assert!(Mlp::from_params(&[2, 1], vec![Tensor::zeros(&[1, 2]), Tensor::zeros(&[1, 1])]).is_err());
    }

    #[test]
    fn nesterov_matches_hand_computation() {
        let mut p = Tensor::scalar(1.0);
        let mut opt = Sgd::new(0.1, 0.9, true, 0.0);
        opt.step(&mut [&mut p], &[vec![2.0]]);
        // v = 2, step = 2 + 0.9·2 = 3.8
        assert!((p.item() - (1.0 - 0.38)).abs() < 1e-15);
        opt.step(&mut [&mut p], &[vec![1.0]]);
        // v = 0.9·2 + 1 = 2.8, step = 1 + 0.9·2.8 = 3.52
        assert!((p.item() - (0.62 - 0.352)).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_pulls_towards_zero() {
        let mut p = Tensor::scalar(2.0);
        let mut opt = Sgd::new(0.5, 0.0, false, 0.1);
        opt.step(&mut [&mut p], &[vec![0.0]]);
        assert!((p.item() - 1.9).abs() < 1e-15);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = vec![vec![3.0], vec![4.0]];
        let n = clip_grad_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        let after = (g[0][0] * g[0][0] + g[1][0] * g[1][0]).sqrt();
        assert!((after - 1.0).abs() < 1e-6);
        let mut small = vec![vec![0.1]];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small[0][0], 0.1);
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut p = Tensor::scalar(3.0);
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g = vec![2.0 * p.item()];
            opt.step(&mut [&mut p], &[g]);
        }
        assert!(p.item().abs() < 1e-2);
    }
}
