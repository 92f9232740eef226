//! Differentiable targets `L(theta) = -log p(x, theta)`.

mod dataset;
mod gaussian;
mod linreg;
mod mlp;
pub mod nn;

pub use dataset::{two_moons, Dataset};
pub use gaussian::GaussianTarget;
pub use linreg::BayesLinRegTarget;
pub use mlp::{fixup_init, MlpClassifier, MlpConfig, PriorConfig};

use rand::RngCore;

use crate::error::Result;

/// Which examples enter a gradient evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    Full,
    Indices(&'a [usize]),
}

impl Batch<'_> {
    /// Number of examples in the batch given the dataset size.
    pub fn len(&self, n: usize) -> usize {
        match self {
            Batch::Full => n,
            Batch::Indices(ix) => ix.len(),
        }
    }

    pub fn is_empty(&self, n: usize) -> bool {
        self.len(n) == 0
    }
}

pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    /// Size of the dataset behind the likelihood; zero for analytic targets.
    fn num_examples(&self) -> usize {
        0
    }

    /// Writes the gradient of the minibatch estimate of `L(theta)` into
    /// `grad` and returns the estimate itself. The data term is rescaled by
    /// `N / |batch|`, the prior term is not.
    fn minibatch_gradient(&self, theta: &[f64], batch: Batch<'_>, grad: &mut [f64]) -> Result<f64>;

    fn full_gradient(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.minibatch_gradient(theta, Batch::Full, grad)
    }

    /// Normalized `log p(x, theta)` where tractable.
    fn log_joint(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    fn initial_theta(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
        vec![0.0; self.dim()]
    }
}

/// Targets that produce class probabilities.
pub trait Classifier: Target {
    fn input_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Class probabilities for one input; non-negative and summing to one.
    fn predict(&self, theta: &[f64], input: &[f64]) -> Result<Vec<f64>>;
}

pub(crate) fn check_theta(theta: &[f64], dim: usize) -> Result<()> {
    if theta.len() != dim {
        return Err(crate::Error::Config(format!(
            "parameter vector has length {}, target expects {dim}",
            theta.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_grad(grad: &[f64], dim: usize) -> Result<()> {
    if grad.len() != dim {
        return Err(crate::Error::Config(format!(
            "gradient buffer has length {}, target expects {dim}",
            grad.len()
        )));
    }
    Ok(())
}
