use crate::error::{Error, Result};

use super::{check_grad, check_theta, Batch, Target};

/// Diagonal Gaussian `N(mu, diag(var))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mu: Vec<f64>,
    var: Vec<f64>,
}

impl GaussianTarget {
    pub fn new(mu: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mu.len() != var.len() || mu.is_empty() {
            return Err(Error::Config(format!(
                "gaussian target needs equal, non-zero lengths (mu {}, var {})",
                mu.len(),
                var.len()
            )));
        }
        if let Some(v) = var.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("gaussian variance must be positive, got {v}")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("gaussian mean must be finite".into()));
        }
        Ok(Self { mu, var })
    }

    /// `N(0, 1)` in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mu
    }

    pub fn variance(&self) -> &[f64] {
        &self.var
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn minibatch_gradient(&self, theta: &[f64], _batch: Batch<'_>, grad: &mut [f64]) -> Result<f64> {
        check_theta(theta, self.dim())?;
        check_grad(grad, self.dim())?;
        let mut loss = 0.0;
        for i in 0..theta.len() {
            let r = theta[i] - self.mu[i];
            grad[i] = r / self.var[i];
            loss += 0.5 * r * r / self.var[i];
        }
        Ok(loss)
    }

    fn log_joint(&self, theta: &[f64]) -> Option<f64> {
        if theta.len() != self.dim() {
            return None;
        }
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        Some(
            theta
                .iter()
                .zip(&self.mu)
                .zip(&self.var)
                .map(|((t, m), v)| -0.5 * ((t - m).powi(2) / v + v.ln() + ln_2pi))
                .sum(),
        )
    }
}
