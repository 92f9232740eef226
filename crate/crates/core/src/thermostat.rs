//! Temperature-to-noise policies.
//!
//! A policy maps the per-parameter temperature `xi` to the momentum noise
//! amplitude `alpha(xi)` and the friction `beta(xi) = alpha(xi) + xi`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermostatKind {
    /// `alpha(xi) = max(D - xi, 0)`, so friction never drops below `D`.
    Atmc,
    /// `alpha(xi) = D`; friction turns negative once `xi < -D`.
    NoseHoover,
    /// `alpha = beta = 0`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermostatPolicy {
    pub kind: ThermostatKind,
    /// Momentum-noise level `D` (1/time).
    pub noise: f64,
}

impl ThermostatPolicy {
    pub fn new(kind: ThermostatKind, noise: f64) -> Result<Self> {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::Config(format!(
                "momentum noise D must be finite and non-negative, got {noise}"
            )));
        }
        Ok(Self { kind, noise })
    }

    pub fn atmc(noise: f64) -> Result<Self> {
        Self::new(ThermostatKind::Atmc, noise)
    }

    pub fn nose_hoover(noise: f64) -> Result<Self> {
        Self::new(ThermostatKind::NoseHoover, noise)
    }

    #[inline]
    pub fn alpha1(&self, xi: f64) -> f64 {
        match self.kind {
            ThermostatKind::Atmc => (self.noise - xi).max(0.0),
            ThermostatKind::NoseHoover => self.noise,
            ThermostatKind::None => 0.0,
        }
    }

    #[inline]
    pub fn beta1(&self, xi: f64) -> f64 {
        match self.kind {
            // max(D - xi, 0) + xi, without the cancellation.
            ThermostatKind::Atmc => self.noise.max(xi),
            ThermostatKind::NoseHoover => self.noise + xi,
            ThermostatKind::None => 0.0,
        }
    }

    pub fn alpha(&self, xi: &[f64]) -> Result<Vec<f64>> {
        ensure_finite(xi, "temperature")?;
        Ok(xi.iter().map(|&x| self.alpha1(x)).collect())
    }

    pub fn beta(&self, xi: &[f64]) -> Result<Vec<f64>> {
        ensure_finite(xi, "temperature")?;
        Ok(xi.iter().map(|&x| self.beta1(x)).collect())
    }
}

/// Source of the momentum noise and friction used by the integrator.
///
/// `Fixed` supplies constants independent of `xi`; the temperature then does
/// not evolve (the SGHMC special case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Friction {
    Thermostat(ThermostatPolicy),
    Fixed { alpha: f64, beta: f64 },
}

impl Friction {
    /// `(alpha, beta)` for one component at temperature `xi`.
    #[inline]
    pub fn coefficients(&self, xi: f64) -> (f64, f64) {
        match self {
            Friction::Thermostat(policy) => (policy.alpha1(xi), policy.beta1(xi)),
            Friction::Fixed { alpha, beta } => (*alpha, *beta),
        }
    }

    /// Whether the temperature carries dynamics of its own.
    pub fn evolves_temperature(&self) -> bool {
        matches!(self, Friction::Thermostat(_))
    }
}
