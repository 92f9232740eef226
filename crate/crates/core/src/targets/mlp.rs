//! Residual SELU classifier with weight-normalized dense layers.
//!
//! Topology: a stem `selu(W0 x + b0)`, then `blocks` residual blocks
//! `h + W2 selu(W1 h + b1) + b2`, then softmax output `Wout h + bout`.
//! Every row of every `W` is `phi_s * phi_d / |phi_d|`. Gradients are
//! accumulated by a hand-written backward pass over this fixed topology.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::nn::{direction_prior_energy, group_laplace_energy, group_laplace_grad, selu, selu_grad};
use super::{check_grad, check_theta, Batch, Classifier, Dataset, Target};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Scale `b` of the group Laplace prior on each feature scale.
    pub laplace_scale: f64,
    /// Stiffness of the unit-length direction prior; `None` uses the fan-in.
    pub direction_strength: Option<f64>,
    /// Variance of the zero-mean Gaussian prior on biases.
    pub bias_var: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            laplace_scale: 5.0,
            direction_strength: None,
            bias_var: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub width: usize,
    /// Number of residual blocks.
    pub blocks: usize,
    pub classes: usize,
    /// Initial scale of the last layer in each residual branch.
    pub kappa: f64,
    pub prior: PriorConfig,
}

impl MlpConfig {
    pub fn new(input_dim: usize, width: usize, blocks: usize, classes: usize) -> Self {
        Self {
            input_dim,
            width,
            blocks,
            classes,
            kappa: 0.1,
            prior: PriorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.classes < 2 {
            return Err(Error::Config(format!(
                "mlp needs positive input dim and width and at least two classes (got {}, {}, {})",
                self.input_dim, self.width, self.classes
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        let p = &self.prior;
        if !(p.laplace_scale > 0.0 && p.bias_var > 0.0) || p.direction_strength.is_some_and(|d| !(d >= 0.0)) {
            return Err(Error::Config(format!("invalid prior configuration {p:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Start of the `fan_out x fan_in` direction block; scales and biases follow.
    offset: usize,
    residual_final: bool,
}

impl Layer {
    fn directions(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn scales(&self) -> std::ops::Range<usize> {
        let s = self.offset + self.fan_in * self.fan_out;
        s..s + self.fan_out
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let s = self.offset + (self.fan_in + 1) * self.fan_out;
        s..s + self.fan_out
    }

    fn len(&self) -> usize {
        (self.fan_in + 2) * self.fan_out
    }
}

/// Effective weights of one layer for a given parameter vector.
struct Weights {
    w: Vec<f64>,
    inv_norm: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpClassifier {
    config: MlpConfig,
    layers: Vec<Layer>,
    dim: usize,
    train: Dataset,
}

/// Activations kept for the backward pass.
struct Trace {
    stem_pre: Vec<f64>,
    block_in: Vec<Vec<f64>>,
    block_pre: Vec<Vec<f64>>,
    block_act: Vec<Vec<f64>>,
    last: Vec<f64>,
    logits: Vec<f64>,
}

fn affine(weights: &Weights, theta: &[f64], layer: &Layer, x: &[f64], out: &mut Vec<f64>) {
    let bias = &theta[layer.biases()];
    out.clear();
    out.extend(
        weights
            .w
            .chunks_exact(layer.fan_in)
            .zip(bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
    );
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

impl MlpClassifier {
    pub fn new(config: MlpConfig, train: Dataset) -> Result<Self> {
        config.validate()?;
        if train.dim() != config.input_dim {
            return Err(Error::Config(format!(
                "dataset has {} feature columns, model expects {}",
                train.dim(),
                config.input_dim
            )));
        }
        if train.is_empty() {
            return Err(Error::Config("training dataset is empty".into()));
        }
        if train.num_classes() > config.classes {
            return Err(Error::Config(format!(
                "dataset label {} exceeds model class count {}",
                train.num_classes() - 1,
                config.classes
            )));
        }
        let mut layers = Vec::with_capacity(2 * config.blocks + 2);
        let mut offset = 0;
        let mut push = |fan_in, fan_out, residual_final| {
            let layer = Layer {
                fan_in,
                fan_out,
                offset,
                residual_final,
            };
            offset += layer.len();
            layers.push(layer);
        };
        push(config.input_dim, config.width, false);
        for _ in 0..config.blocks {
            push(config.width, config.width, false);
            push(config.width, config.width, true);
        }
        push(config.width, config.classes, false);
        Ok(Self {
            config,
            layers,
            dim: offset,
            train,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn train_data(&self) -> &Dataset {
        &self.train
    }

    fn weights(&self, theta: &[f64]) -> Result<Vec<Weights>> {
        self.layers
            .iter()
            .map(|layer| {
                let dirs = &theta[layer.directions()];
                let scales = &theta[layer.scales()];
                let mut w = Vec::with_capacity(dirs.len());
                let mut inv_norm = Vec::with_capacity(layer.fan_out);
                for (row, s) in dirs.chunks_exact(layer.fan_in).zip(scales) {
                    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if !(n > 0.0) || !n.is_finite() {
                        return Err(Error::DegenerateDirection);
                    }
                    w.extend(row.iter().map(|d| s * d / n));
                    inv_norm.push(1.0 / n);
                }
                Ok(Weights { w, inv_norm })
            })
            .collect()
    }

    fn forward(&self, weights: &[Weights], theta: &[f64], x: &[f64]) -> Trace {
        let b = self.config.blocks;
        let mut stem_pre = Vec::new();
        affine(&weights[0], theta, &self.layers[0], x, &mut stem_pre);
        let mut h: Vec<f64> = stem_pre.iter().map(|&z| selu(z)).collect();
        let mut block_in = Vec::with_capacity(b);
        let mut block_pre = Vec::with_capacity(b);
        let mut block_act = Vec::with_capacity(b);
        let mut branch = Vec::new();
        for k in 0..b {
            let (l1, l2) = (1 + 2 * k, 2 + 2 * k);
            let mut pre = Vec::new();
            affine(&weights[l1], theta, &self.layers[l1], &h, &mut pre);
            let act: Vec<f64> = pre.iter().map(|&z| selu(z)).collect();
            affine(&weights[l2], theta, &self.layers[l2], &act, &mut branch);
            let next: Vec<f64> = h.iter().zip(&branch).map(|(a, r)| a + r).collect();
            block_in.push(std::mem::replace(&mut h, next));
            block_pre.push(pre);
            block_act.push(act);
        }
        let out = self.layers.len() - 1;
        let mut logits = Vec::new();
        affine(&weights[out], theta, &self.layers[out], &h, &mut logits);
        Trace {
            stem_pre,
            block_in,
            block_pre,
            block_act,
            last: h,
            logits,
        }
    }

    /// Raw output scores for one input.
    pub fn logits(&self, theta: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        check_theta(theta, self.dim)?;
        self.check_input(input)?;
        let weights = self.weights(theta)?;
        Ok(self.forward(&weights, theta, input).logits)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.config.input_dim {
            return Err(Error::Config(format!(
                "input has {} features, model expects {}",
                input.len(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Accumulates `scale * d nll / dW` into `dw` (effective weights) and
    /// `dbias` for one example; returns the example's nll.
    fn backward(
        &self,
        weights: &[Weights],
        theta: &[f64],
        x: &[f64],
        label: usize,
        scale: f64,
        dw: &mut [Vec<f64>],
        dbias: &mut [Vec<f64>],
    ) -> f64 {
        let trace = self.forward(weights, theta, x);
        let logp = log_softmax(&trace.logits);
        let nll = -logp[label];

        let outer = |dw: &mut Vec<f64>, delta: &[f64], input: &[f64]| {
            for (row, d) in dw.chunks_exact_mut(input.len()).zip(delta) {
                for (g, v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
            }
        };
        let transpose = |weights: &Weights, fan_in: usize, delta: &[f64]| {
            let mut back = vec![0.0; fan_in];
            for (row, d) in weights.w.chunks_exact(fan_in).zip(delta) {
                for (b, w) in back.iter_mut().zip(row) {
                    *b += d * w;
                }
            }
            back
        };

        let out = self.layers.len() - 1;
        let delta: Vec<f64> = logp
            .iter()
            .enumerate()
            .map(|(k, lp)| scale * (lp.exp() - if k == label { 1.0 } else { 0.0 }))
            .collect();
        outer(&mut dw[out], &delta, &trace.last);
        dbias[out].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
        let mut dh = transpose(&weights[out], self.config.width, &delta);

        for k in (0..self.config.blocks).rev() {
            let (l1, l2) = (1 + 2 * k, 2 + 2 * k);
            outer(&mut dw[l2], &dh, &trace.block_act[k]);
            dbias[l2].iter_mut().zip(&dh).for_each(|(g, d)| *g += d);
            let dact = transpose(&weights[l2], self.config.width, &dh);
            let dpre: Vec<f64> = dact
                .iter()
                .zip(&trace.block_pre[k])
                .map(|(d, &z)| d * selu_grad(z))
                .collect();
            outer(&mut dw[l1], &dpre, &trace.block_in[k]);
            dbias[l1].iter_mut().zip(&dpre).for_each(|(g, d)| *g += d);
            let through = transpose(&weights[l1], self.config.width, &dpre);
            dh.iter_mut().zip(&through).for_each(|(a, b)| *a += b);
        }

        let dstem: Vec<f64> = dh
            .iter()
            .zip(&trace.stem_pre)
            .map(|(d, &z)| d * selu_grad(z))
            .collect();
        outer(&mut dw[0], &dstem, x);
        dbias[0].iter_mut().zip(&dstem).for_each(|(g, d)| *g += d);
        nll
    }

    fn direction_strength(&self, layer: &Layer) -> f64 {
        self.config.prior.direction_strength.unwrap_or(layer.fan_in as f64)
    }

    /// `-log` of the (unnormalized) prior.
    pub fn prior_energy(&self, theta: &[f64]) -> f64 {
        let prior = &self.config.prior;
        self.layers
            .iter()
            .map(|layer| {
                let strength = self.direction_strength(layer);
                let dirs: f64 = theta[layer.directions()]
                    .chunks_exact(layer.fan_in)
                    .map(|row| direction_prior_energy(row, strength))
                    .sum();
                let scales: f64 = theta[layer.scales()]
                    .iter()
                    .map(|s| group_laplace_energy(std::slice::from_ref(s), prior.laplace_scale))
                    .sum();
                let biases: f64 = theta[layer.biases()].iter().map(|b| 0.5 * b * b / prior.bias_var).sum();
                dirs + scales + biases
            })
            .sum()
    }
}

impl Target for MlpClassifier {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_examples(&self) -> usize {
        self.train.len()
    }

    fn minibatch_gradient(&self, theta: &[f64], batch: Batch<'_>, grad: &mut [f64]) -> Result<f64> {
        check_theta(theta, self.dim)?;
        check_grad(grad, self.dim)?;
        let n = self.train.len();
        let weights = self.weights(theta)?;
        let mut dw: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.fan_in * l.fan_out]).collect();
        let mut dbias: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.fan_out]).collect();

        let mut data_loss = 0.0;
        match batch {
            Batch::Full => {
                for i in 0..n {
                    data_loss += self.backward(&weights, theta, self.train.input(i), self.train.label(i), 1.0, &mut dw, &mut dbias);
                }
            }
            Batch::Indices(ix) => {
                if ix.is_empty() {
                    return Err(Error::Config("empty minibatch".into()));
                }
                let scale = n as f64 / ix.len() as f64;
                for &i in ix {
                    if i >= n {
                        return Err(Error::Config(format!("batch index {i} out of range for {n} examples")));
                    }
                    data_loss += scale * self.backward(&weights, theta, self.train.input(i), self.train.label(i), scale, &mut dw, &mut dbias);
                }
            }
        }

        let prior = &self.config.prior;
        for (k, layer) in self.layers.iter().enumerate() {
            let strength = self.direction_strength(layer);
            let fan_in = layer.fan_in;
            let scales_range = layer.scales();
            let dirs_range = layer.directions();
            for i in 0..layer.fan_out {
                let row = &theta[dirs_range.start + i * fan_in..dirs_range.start + (i + 1) * fan_in];
                let gw = &dw[k][i * fan_in..(i + 1) * fan_in];
                let inv = weights[k].inv_norm[i];
                let s = theta[scales_range.start + i];
                // Projection of the weight gradient onto the unit direction.
                let along: f64 = gw.iter().zip(row).map(|(g, d)| g * d * inv).sum();
                let sq: f64 = row.iter().map(|x| x * x).sum();
                let dir_prior = 2.0 * strength * (sq - 1.0);
                let gdir = &mut grad[dirs_range.start + i * fan_in..dirs_range.start + (i + 1) * fan_in];
                for ((g, &w), &d) in gdir.iter_mut().zip(gw).zip(row) {
                    *g = s * inv * (w - along * d * inv) + dir_prior * d;
                }
                grad[scales_range.start + i] = along + group_laplace_grad(&[s], prior.laplace_scale)[0];
            }
            for ((g, &db), &b) in grad[layer.biases()].iter_mut().zip(&dbias[k]).zip(&theta[layer.biases()]) {
                *g = db + b / prior.bias_var;
            }
        }
        Ok(data_loss + self.prior_energy(theta))
    }

    fn initial_theta(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        fixup_init(self, self.config.kappa, rng)
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn num_classes(&self) -> usize {
        self.config.classes
    }

    fn predict(&self, theta: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        let logits = self.logits(theta, input)?;
        Ok(log_softmax(&logits).into_iter().map(f64::exp).collect())
    }
}

/// Unit-length Gaussian directions, unit scales, zero biases, and scale
/// `kappa` on the last layer of every residual branch.
pub fn fixup_init<R: Rng + ?Sized>(model: &MlpClassifier, kappa: f64, rng: &mut R) -> Vec<f64> {
    let mut theta = vec![0.0; model.dim];
    for layer in &model.layers {
        let dirs = layer.directions();
        for row in theta[dirs].chunks_exact_mut(layer.fan_in) {
            loop {
                row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 {
                    row.iter_mut().for_each(|v| *v /= n);
                    break;
                }
            }
        }
        let scale = if layer.residual_final { kappa } else { 1.0 };
        theta[layer.scales()].fill(scale);
        theta[layer.biases()].fill(0.0);
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::two_moons;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(width: usize, blocks: usize, n: usize, seed: u64) -> (MlpClassifier, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = two_moons(n, 0.2, &mut rng);
        (MlpClassifier::new(MlpConfig::new(2, width, blocks, 2), data).unwrap(), rng)
    }

    /// Initialization with non-trivial scales, biases and non-unit directions.
    fn perturbed(m: &MlpClassifier, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut theta = fixup_init(m, 0.5, rng);
        for v in theta.iter_mut() {
            *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        theta
    }

    fn fd_check(m: &MlpClassifier, theta: &[f64], batch: Batch<'_>) {
        let mut g = vec![0.0; m.dim()];
        m.minibatch_gradient(theta, batch, &mut g).unwrap();
        let loss = |t: &[f64]| {
            let mut scratch = vec![0.0; m.dim()];
            m.minibatch_gradient(t, batch, &mut scratch).unwrap()
        };
        let eps = 1e-5;
        let mut t = theta.to_vec();
        for i in 0..theta.len() {
            t[i] = theta[i] + eps;
            let hi = loss(&t);
            t[i] = theta[i] - eps;
            let lo = loss(&t);
            t[i] = theta[i];
            let fd = (hi - lo) / (2.0 * eps);
            let tol = 1e-4 * g[i].abs().max(1.0);
            assert!((fd - g[i]).abs() < tol, "param {i}: fd={fd} analytic={}", g[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (m, mut rng) = model(8, 3, 20, 1);
        let theta = perturbed(&m, &mut rng);
        fd_check(&m, &theta, Batch::Full);
        fd_check(&m, &theta, Batch::Indices(&[3, 7, 7, 19]));
    }

    #[test]
    fn full_batch_indices_equal_full_gradient() {
        let (m, mut rng) = model(6, 2, 12, 2);
        let theta = perturbed(&m, &mut rng);
        let all: Vec<usize> = (0..12).collect();
        let mut a = vec![0.0; m.dim()];
        let mut b = vec![0.0; m.dim()];
        m.full_gradient(&theta, &mut a).unwrap();
        m.minibatch_gradient(&theta, Batch::Indices(&all), &mut b).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn minibatch_gradient_is_unbiased() {
        let (m, mut rng) = model(4, 1, 6, 3);
        let theta = perturbed(&m, &mut rng);
        let mut full = vec![0.0; m.dim()];
        m.full_gradient(&theta, &mut full).unwrap();
        for k in 1..=3usize {
            let mut mean = vec![0.0; m.dim()];
            let mut count = 0;
            let mut g = vec![0.0; m.dim()];
            for mask in 0u32..64 {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let ix: Vec<usize> = (0..6).filter(|i| mask & (1 << i) != 0).collect();
                m.minibatch_gradient(&theta, Batch::Indices(&ix), &mut g).unwrap();
                mean.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                count += 1;
            }
            for (a, f) in mean.iter().zip(&full) {
                assert!((a / count as f64 - f).abs() < 1e-9 * f.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_output_layer_gives_uniform_predictions() {
        let (m, mut rng) = model(5, 1, 8, 4);
        let mut theta = fixup_init(&m, 0.1, &mut rng);
        let out = *m.layers.last().unwrap();
        theta[out.scales()].fill(0.0);
        theta[out.biases()].fill(0.0);
        for x in m.train.inputs() {
            let p = m.predict(&theta, x).unwrap();
            assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        }
        // d nll / d bout averaged over the data is mean(softmax - onehot); the
        // Gaussian prior on biases vanishes at zero.
        let mut g = vec![0.0; m.dim()];
        m.full_gradient(&theta, &mut g).unwrap();
        let n = m.train.len() as f64;
        for (k, gk) in g[out.biases()].iter().enumerate() {
            let expected: f64 = m.train.labels().iter().map(|&l| 0.5 - if l == k { 1.0 } else { 0.0 }).sum();
            assert!((gk / n - expected / n).abs() < 1e-12);
        }
    }

    #[test]
    fn output_invariant_to_direction_scaling() {
        let (m, mut rng) = model(6, 2, 10, 5);
        let theta = perturbed(&m, &mut rng);
        for gamma in [0.1, 10.0] {
            let mut scaled = theta.clone();
            for layer in &m.layers {
                scaled[layer.directions()].iter_mut().for_each(|v| *v *= gamma);
            }
            for x in m.train.inputs() {
                let a = m.predict(&theta, x).unwrap();
                let b = m.predict(&scaled, x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn predictions_are_distributions() {
        let (m, mut rng) = model(6, 2, 10, 6);
        let theta = perturbed(&m, &mut rng);
        for x in m.train.inputs() {
            let p = m.predict(&theta, x).unwrap();
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixup_init_properties() {
        let (m, mut rng) = model(8, 4, 10, 7);
        let theta = fixup_init(&m, 0.1, &mut rng);
        for layer in &m.layers {
            for row in theta[layer.directions()].chunks_exact(layer.fan_in) {
                let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-9);
            }
            let expected = if layer.residual_final { 0.1 } else { 1.0 };
            assert!(theta[layer.scales()].iter().all(|&s| s == expected));
        }

        // kappa = 0: every residual branch is silent, so the output equals the
        // model with the blocks removed.
        let zero = fixup_init(&m, 0.0, &mut rng);
        let skip = MlpClassifier::new(MlpConfig::new(2, 8, 0, 2), m.train.clone()).unwrap();
        let stem = m.layers[0];
        let out = *m.layers.last().unwrap();
        let mut skip_theta = zero[stem.offset..stem.offset + stem.len()].to_vec();
        skip_theta.extend_from_slice(&zero[out.offset..out.offset + out.len()]);
        for x in m.train.inputs() {
            assert_eq!(m.logits(&zero, x).unwrap(), skip.logits(&skip_theta, x).unwrap());
        }
    }

    #[test]
    fn fixup_forward_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dim = 10;
        let data = Dataset::new(vec![0.0; dim], vec![0], dim).unwrap();
        let m = MlpClassifier::new(MlpConfig::new(dim, 32, 4, 10), data).unwrap();
        let theta = fixup_init(&m, 0.1, &mut rng);
        let mut outs = Vec::new();
        for _ in 0..2000 {
            let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            outs.extend(m.logits(&theta, &x).unwrap());
        }
        let mean = outs.iter().sum::<f64>() / outs.len() as f64;
        let sd = (outs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / outs.len() as f64).sqrt();
        assert!((0.3..=3.0).contains(&sd), "output sd {sd}");
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = two_moons(10, 0.1, &mut rng);
        assert!(MlpClassifier::new(MlpConfig::new(3, 4, 1, 2), data.clone()).is_err());
        let m = MlpClassifier::new(MlpConfig::new(2, 4, 1, 2), data).unwrap();
        let mut g = vec![0.0; m.dim()];
        assert!(m.minibatch_gradient(&vec![0.1; m.dim() - 1], Batch::Full, &mut g).is_err());
        assert!(m.predict(&vec![0.1; m.dim()], &[1.0]).is_err());
        let theta = vec![0.0; m.dim()];
        assert!(matches!(m.minibatch_gradient(&theta, Batch::Full, &mut g), Err(Error::DegenerateDirection)));
    }
}
