//! Synthetic Gaussian gradient noise with known covariance.
//!
//! A per-evaluation perturbation of standard deviation `sigma` corresponds to
//! a diffusion covariance `B = sigma^2 h` in the continuous-time dynamics.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// Independent per-component perturbations with standard deviation `sigma`.
    GaussianDiag { sigma: Vec<f64> },
}

impl NoiseModel {
    pub fn gaussian(sigma: Vec<f64>) -> Result<Self> {
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Config(format!("noise standard deviation must be non-negative, got {s}")));
        }
        Ok(NoiseModel::GaussianDiag { sigma })
    }

    /// Isotropic noise chosen so that the implied covariance is `b` at step size `h`.
    pub fn from_b(b: f64, h: f64, dim: usize) -> Result<Self> {
        if !(b >= 0.0 && h > 0.0) || !b.is_finite() {
            return Err(Error::Config(format!("need b >= 0 and h > 0, got b={b} h={h}")));
        }
        Self::gaussian(vec![(b / h).sqrt(); dim])
    }

    /// Diagonal of `B = sigma^2 h`; empty for the noiseless model.
    pub fn implied_b(&self, h: f64) -> Vec<f64> {
        match self {
            NoiseModel::None => Vec::new(),
            NoiseModel::GaussianDiag { sigma } => sigma.iter().map(|s| s * s * h).collect(),
        }
    }

    pub fn is_none(&self) -> bool {
        match self {
            NoiseModel::None => true,
            NoiseModel::GaussianDiag { sigma } => sigma.iter().all(|&s| s == 0.0),
        }
    }

    /// Adds `sigma * eta` to `grad` in place.
    pub fn perturb<R: Rng + ?Sized>(&self, grad: &mut [f64], rng: &mut R) -> Result<()> {
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::GaussianDiag { sigma } => {
                if sigma.len() != grad.len() {
                    return Err(Error::Config(format!(
                        "noise model has {} components, gradient has {}",
                        sigma.len(),
                        grad.len()
                    )));
                }
                for (g, s) in grad.iter_mut().zip(sigma) {
                    let eta: f64 = rng.sample(StandardNormal);
                    *g += s * eta;
                }
                Ok(())
            }
        }
    }

    pub fn noisy_gradient<R: Rng + ?Sized>(&self, clean: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut g = clean.to_vec();
        self.perturb(&mut g, rng)?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clean = [1.0, -2.0];
        assert_eq!(NoiseModel::None.noisy_gradient(&clean, &mut rng).unwrap(), clean);
        let zero = NoiseModel::gaussian(vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.noisy_gradient(&clean, &mut rng).unwrap(), clean);
        assert!(zero.is_none());
    }

    #[test]
    fn variance_and_mean_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = NoiseModel::gaussian(vec![2.0]).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| model.noisy_gradient(&[0.0], &mut rng).unwrap()[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * 2.0 / (n as f64).sqrt());
        // Standard error of the sample variance of a Gaussian: sigma^2 sqrt(2/(n-1)).
        assert!((var - 4.0).abs() < 3.0 * 4.0 * (2.0 / (n - 1) as f64).sqrt(), "var {var}");
    }

    #[test]
    fn b_conversion_round_trips() {
        let model = NoiseModel::from_b(0.5, 0.01, 3).unwrap();
        for b in model.implied_b(0.01) {
            assert!((b - 0.5).abs() < 1e-12);
        }
        assert!(NoiseModel::gaussian(vec![-1.0]).is_err());
        assert!(NoiseModel::from_b(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = NoiseModel::gaussian(vec![1.0]).unwrap();
        assert!(model.noisy_gradient(&[0.0, 0.0], &mut rng).is_err());
    }
}
