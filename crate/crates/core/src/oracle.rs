//! Reference computations used to check the samplers and the evaluation code.
//!
//! Nothing here calls into the modules it is meant to check.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector4};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Multivariate normal given by its mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosteriorClosedForm {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPosteriorClosedForm {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn marginal_variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }
}

/// Conjugate posterior of Bayesian linear regression with design `x`
/// (row-major, `n x d`), precision `X^T X / noise_var + I / prior_var`.
/// `prior_var = inf` gives the flat-prior least-squares posterior.
pub fn linreg_posterior(x: &[f64], d: usize, y: &[f64], noise_var: f64, prior_var: f64) -> Result<GaussianPosteriorClosedForm> {
    let n = y.len();
    if d == 0 || x.len() != n * d {
        return Err(Error::Config(format!("design of {} entries is not {n} x {d}", x.len())));
    }
    if !(noise_var > 0.0) || !(prior_var > 0.0) {
        return Err(Error::Config("variances must be positive".into()));
    }
    let design = DMatrix::from_row_slice(n, d, x);
    let response = DVector::from_column_slice(y);
    let precision = design.transpose() * &design / noise_var + DMatrix::identity(d, d) / prior_var;
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::Numerical("posterior precision is not positive definite".into()))?;
    let mean = chol.solve(&(design.transpose() * response / noise_var));
    let covariance = chol.inverse();
    Ok(GaussianPosteriorClosedForm { mean, covariance })
}

/// Effective sample size from the autocorrelation function, truncated with
/// Geyer's initial monotone positive sequence. A constant series gives 1.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return n as f64;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|x| Complex::new(x - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) || c0 < 1e-300 * n as f64 {
        return 1.0;
    }
    let rho = |k: usize| buf[k].re / c0;

    // Sum of consecutive autocorrelation pairs while positive and non-increasing.
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while k + 1 < n {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        k += 2;
    }
    let tau = tau.max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64 * n.ilog2().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMoments {
    pub mean: f64,
    pub variance: f64,
    /// `mean - reference mean`.
    pub mean_error: f64,
    /// `variance / reference variance - 1`.
    pub variance_error: f64,
    /// ESS of the component itself.
    pub ess: f64,
    /// ESS of the centred squares, which governs the variance estimate.
    pub ess_sq: f64,
    /// `3 sqrt(reference variance / ess)`.
    pub mean_tolerance: f64,
    /// Three standard errors of the variance ratio, `3 sqrt(var((x - mu)^2) / ess_sq) / var`.
    pub variance_tolerance: f64,
}

impl ComponentMoments {
    pub fn mean_ok(&self) -> bool {
        self.mean_error.abs() <= self.mean_tolerance
    }

    pub fn variance_ok(&self) -> bool {
        self.variance_error.abs() <= self.variance_tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub components: Vec<ComponentMoments>,
    /// Set when some component never moves, so no tolerance can be derived.
    pub inconclusive: bool,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        !self.inconclusive && self.components.iter().all(|c| c.mean_ok() && c.variance_ok())
    }
}

/// Compares chain moments with a Gaussian reference, using autocorrelation-
/// adjusted tolerances.
pub fn moment_check(chain: &[Vec<f64>], reference: &GaussianPosteriorClosedForm) -> Result<MomentReport> {
    const MIN_LEN: usize = 1000;
    if chain.len() < MIN_LEN {
        return Err(Error::InsufficientData {
            needed: MIN_LEN,
            got: chain.len(),
        });
    }
    let d = reference.dim();
    if chain.iter().any(|t| t.len() != d) {
        return Err(Error::Config(format!("chain rows must have length {d}")));
    }
    let n = chain.len() as f64;
    let mut inconclusive = false;
    let components = (0..d)
        .map(|i| {
            let xs: Vec<f64> = chain.iter().map(|t| t[i]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
            let variance = sq.iter().sum::<f64>() / (n - 1.0);
            let ref_var = reference.marginal_variance(i);
            let constant = xs.iter().all(|&x| x == xs[0]);
            inconclusive |= constant;
            let ess = if constant { 1.0 } else { effective_sample_size(&xs) };
            let ess_sq = if constant { 1.0 } else { effective_sample_size(&sq) };
            let sq_mean = sq.iter().sum::<f64>() / n;
            let sq_var = sq.iter().map(|s| (s - sq_mean).powi(2)).sum::<f64>() / n;
            ComponentMoments {
                mean,
                variance,
                mean_error: mean - reference.mean[i],
                variance_error: variance / ref_var - 1.0,
                ess,
                ess_sq,
                mean_tolerance: 3.0 * (ref_var / ess).sqrt(),
                variance_tolerance: 3.0 * (sq_var / ess_sq).sqrt() / ref_var,
            }
        })
        .collect();
    Ok(MomentReport {
        components,
        inconclusive,
    })
}

/// ECE over 8 equal-count confidence bins, the first `n mod 8` bins holding
/// one extra example, computed by explicit grouping.
pub fn reference_ece(confidences: &[f64], correctness: &[bool]) -> Result<f64> {
    const BINS: usize = 8;
    let n = confidences.len();
    if n != correctness.len() {
        return Err(Error::Config("confidence and correctness lengths differ".into()));
    }
    if n < BINS {
        return Err(Error::InsufficientData { needed: BINS, got: n });
    }
    let mut pairs: Vec<(f64, usize, bool)> = confidences
        .iter()
        .zip(correctness)
        .enumerate()
        .map(|(i, (&c, &ok))| (c, i, ok))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));

    let mut bin_of = vec![0usize; n];
    let mut filled = [0usize; BINS];
    let mut bin = 0;
    for slot in bin_of.iter_mut() {
        let capacity = n / BINS + if bin < n % BINS { 1 } else { 0 };
        if filled[bin] == capacity {
            bin += 1;
        }
        *slot = bin;
        filled[bin] += 1;
    }
    let mut conf_sum = [0.0; BINS];
    let mut hit_sum = [0.0; BINS];
    for ((c, _, ok), &b) in pairs.iter().zip(&bin_of) {
        conf_sum[b] += c;
        if *ok {
            hit_sum[b] += 1.0;
        }
    }
    let mut total = 0.0;
    for b in 0..BINS {
        // |sum conf - sum hits| / n equals the weight-times-gap term.
        total += (conf_sum[b] - hit_sum[b]).abs();
    }
    Ok(total / n as f64)
}

/// Stationary moments of ATMC with Gaussian kinetics on a 1-D Gaussian target
/// while the temperature stays below `D` (so friction is exactly `D`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmcGaussianStationary {
    /// `E[theta^2]` of the discretized chain.
    pub theta2: f64,
    /// Long-run mean of the noise amplitude `alpha = D - xi`.
    pub alpha_mean: f64,
    pub xi_mean: f64,
}

/// Solves the discrete Lyapunov equation of the fused step
/// `p' = e p - g1 theta / var + sqrt(m alpha g2) eta`, `theta' = theta + h p' / m`
/// per unit noise amplitude, then fixes the mean amplitude from the
/// thermostat balance `E[p'^2 / m] = 1`.
pub fn atmc_gaussian_stationary(target_var: f64, mass: f64, noise: f64, h: f64) -> Result<AtmcGaussianStationary> {
    if !(target_var > 0.0 && mass > 0.0 && noise > 0.0 && h > 0.0) {
        return Err(Error::Config("all arguments must be positive".into()));
    }
    let e = (-noise * h).exp();
    let g1 = (1.0 - e) / noise;
    let g2 = (1.0 - e * e) / noise;
    // State (theta, p) after a full step.
    let f = Matrix2::new(1.0 - h * g1 / (mass * target_var), h * e / mass, -g1 / target_var, e);
    let b = nalgebra::Vector2::new(h / mass, 1.0);
    let q = b * b.transpose() * (mass * g2);
    let mut kron = Matrix4::zeros();
    for (r, c) in (0..4).flat_map(|r| (0..4).map(move |c| (r, c))) {
        kron[(r, c)] = f[(r / 2, c / 2)] * f[(r % 2, c % 2)];
    }
    let lhs = Matrix4::identity() - kron;
    let rhs = Vector4::new(q[(0, 0)], q[(0, 1)], q[(1, 0)], q[(1, 1)]);
    let l = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("step is unstable; no stationary covariance".into()))?;
    let (l_tt, l_pp) = (l[0], l[3]);
    if !(l_tt > 0.0 && l_pp > 0.0) {
        return Err(Error::Numerical("step is unstable; no stationary covariance".into()));
    }
    let alpha_mean = mass / l_pp;
    Ok(AtmcGaussianStationary {
        theta2: alpha_mean * l_tt,
        alpha_mean,
        xi_mean: noise - alpha_mean,
    })
}
