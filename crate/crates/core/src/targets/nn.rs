//! Scalar building blocks of the weight-normalized network and its priors.

use crate::error::{Error, Result};

pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[inline]
pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

/// Derivative of [`selu`]; strictly positive everywhere.
#[inline]
pub fn selu_grad(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `scale * direction / |direction|`.
pub fn weightnorm_feature(direction: &[f64], scale: f64) -> Result<Vec<f64>> {
    let n = norm(direction);
    if !(n > 0.0) {
        return Err(Error::DegenerateDirection);
    }
    Ok(direction.iter().map(|d| scale * d / n).collect())
}

/// `-log p(phi_d)` for `p(phi_d) ~ exp(-strength/2 (|phi_d|^2 - 1)^2)`.
pub fn direction_prior_energy(direction: &[f64], strength: f64) -> f64 {
    let sq: f64 = direction.iter().map(|x| x * x).sum();
    0.5 * strength * (sq - 1.0).powi(2)
}

/// Gradient of [`direction_prior_energy`]: `2 strength (|phi_d|^2 - 1) phi_d`.
pub fn direction_prior_grad(direction: &[f64], strength: f64) -> Vec<f64> {
    let sq: f64 = direction.iter().map(|x| x * x).sum();
    let c = 2.0 * strength * (sq - 1.0);
    direction.iter().map(|x| c * x).collect()
}

/// Origin guard for the group Laplace gradient.
pub const LAPLACE_EPS: f64 = 1e-12;

/// `-log p(theta)` for the group Laplace prior `p ~ exp(-|theta| / b)`.
pub fn group_laplace_energy(group: &[f64], b: f64) -> f64 {
    norm(group) / b
}

/// `theta / (b max(|theta|, eps))`; zero at the origin.
pub fn group_laplace_grad(group: &[f64], b: f64) -> Vec<f64> {
    let denom = b * norm(group).max(LAPLACE_EPS);
    group.iter().map(|x| x / denom).collect()
}
