use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::{check_grad, check_theta, Batch, Target};

/// Bayesian linear regression with Gaussian noise and an isotropic Gaussian prior.
///
/// `L(theta) = sum_i (y_i - x_i . theta)^2 / (2 noise_var) + |theta|^2 / (2 prior_var)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesLinRegTarget {
    /// Row-major `n x d` design matrix.
    design: Vec<f64>,
    response: Vec<f64>,
    dim: usize,
    noise_var: f64,
    prior_var: f64,
}

impl BayesLinRegTarget {
    pub fn new(design: Vec<f64>, response: Vec<f64>, dim: usize, noise_var: f64, prior_var: f64) -> Result<Self> {
        if dim == 0 || design.len() != response.len() * dim {
            return Err(Error::Config(format!(
                "design matrix of {} entries does not match {} responses x {dim} features",
                design.len(),
                response.len()
            )));
        }
        for (name, v) in [("noise_var", noise_var), ("prior_var", prior_var)] {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            design,
            response,
            dim,
            noise_var,
            prior_var,
        })
    }

    /// Standard-normal design, coefficients drawn from the prior, Gaussian noise.
    pub fn synthetic<R: Rng + ?Sized>(n: usize, dim: usize, noise_var: f64, prior_var: f64, rng: &mut R) -> Result<Self> {
        let truth: Vec<f64> = (0..dim)
            .map(|_| prior_var.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let design: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
        let response = design
            .chunks_exact(dim)
            .map(|row| {
                let mean: f64 = row.iter().zip(&truth).map(|(x, t)| x * t).sum();
                mean + noise_var.sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        Self::new(design, response, dim, noise_var, prior_var)
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.dim..(i + 1) * self.dim]
    }

    fn accumulate(&self, theta: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let row = self.row(i);
        let fit: f64 = row.iter().zip(theta).map(|(x, t)| x * t).sum();
        let resid = fit - self.response[i];
        for (g, x) in grad.iter_mut().zip(row) {
            *g += resid * x / self.noise_var;
        }
        0.5 * resid * resid / self.noise_var
    }
}

impl Target for BayesLinRegTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_examples(&self) -> usize {
        self.response.len()
    }

    fn minibatch_gradient(&self, theta: &[f64], batch: Batch<'_>, grad: &mut [f64]) -> Result<f64> {
        check_theta(theta, self.dim)?;
        check_grad(grad, self.dim)?;
        let n = self.num_examples();
        grad.fill(0.0);
        let data_loss = match batch {
            Batch::Full => (0..n).map(|i| self.accumulate(theta, i, grad)).sum::<f64>(),
            Batch::Indices(ix) => {
                if ix.is_empty() {
                    return Err(Error::Config("empty minibatch".into()));
                }
                let mut loss = 0.0;
                for &i in ix {
                    if i >= n {
                        return Err(Error::Config(format!("batch index {i} out of range for {n} examples")));
                    }
                    loss += self.accumulate(theta, i, grad);
                }
                let scale = n as f64 / ix.len() as f64;
                grad.iter_mut().for_each(|g| *g *= scale);
                loss * scale
            }
        };
        let mut prior = 0.0;
        for (g, t) in grad.iter_mut().zip(theta) {
            *g += t / self.prior_var;
            prior += 0.5 * t * t / self.prior_var;
        }
        Ok(data_loss + prior)
    }

    fn log_joint(&self, theta: &[f64]) -> Option<f64> {
        let mut scratch = vec![0.0; self.dim];
        let loss = self.full_gradient(theta, &mut scratch).ok()?;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let n = self.num_examples() as f64;
        let norm = 0.5 * n * (ln_2pi + self.noise_var.ln()) + 0.5 * self.dim as f64 * (ln_2pi + self.prior_var.ln());
        Some(-loss - norm)
    }
}
