//! Momentum distributions: kinetic energy, parameter velocity and the
//! position-dependent mass, evaluated elementwise per parameter.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Momentum distribution for the sampler.
///
/// `Gaussian` is the `c -> inf` limit of `Hyperbolic`; an infinite speed cap
/// is expressed by choosing the Gaussian variant, never by a sentinel float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KineticsSpec {
    /// `K(p) = |p|^2 / (2m)`.
    Gaussian { mass: f64 },
    /// Relativistic kinetics `K(p) = sum_i m c^2 (sqrt(p_i^2/(m^2 c^2) + 1) - 1)`,
    /// whose velocity never exceeds `speed` in any component.
    Hyperbolic { mass: f64, speed: f64 },
}

impl KineticsSpec {
    pub fn gaussian(mass: f64) -> Result<Self> {
        let spec = KineticsSpec::Gaussian { mass };
        spec.validate()?;
        Ok(spec)
    }

    pub fn hyperbolic(mass: f64, speed: f64) -> Result<Self> {
        let spec = KineticsSpec::Hyperbolic { mass, speed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.base_mass();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Config(format!("kinetics mass must be positive, got {m}")));
        }
        if let KineticsSpec::Hyperbolic { speed, .. } = *self {
            if !(speed.is_finite() && speed > 0.0) {
                return Err(Error::Config(format!(
                    "hyperbolic speed cap must be positive and finite, got {speed}"
                )));
            }
        }
        Ok(())
    }

    /// The hyper-parameter `m`.
    pub fn base_mass(&self) -> f64 {
        match *self {
            KineticsSpec::Gaussian { mass } | KineticsSpec::Hyperbolic { mass, .. } => mass,
        }
    }

    /// Speed cap `c`, `None` for Gaussian kinetics.
    pub fn speed_cap(&self) -> Option<f64> {
        match *self {
            KineticsSpec::Gaussian { .. } => None,
            KineticsSpec::Hyperbolic { speed, .. } => Some(speed),
        }
    }

    /// Kinetic energy of one momentum component.
    #[inline]
    pub fn energy1(&self, p: f64) -> f64 {
        match *self {
            KineticsSpec::Gaussian { mass } => 0.5 * p * p / mass,
            KineticsSpec::Hyperbolic { mass, speed } => {
                // m c^2 (sqrt(1+u^2) - 1) written as m c^2 |u| (|u| / (sqrt(1+u^2) + 1))
                // to avoid cancellation near 0 and overflow for huge |u|.
                let u = (p / (mass * speed)).abs();
                mass * speed * speed * u * (u / (u.hypot(1.0) + 1.0))
            }
        }
    }

    /// Mass `M(p)` of one component; `M(p) >= m`.
    #[inline]
    pub fn mass1(&self, p: f64) -> f64 {
        match *self {
            KineticsSpec::Gaussian { mass } => mass,
            KineticsSpec::Hyperbolic { mass, speed } => mass * (p / (mass * speed)).hypot(1.0),
        }
    }

    /// Velocity `dK/dp = p / M(p)` of one component.
    #[inline]
    pub fn velocity1(&self, p: f64) -> f64 {
        match *self {
            KineticsSpec::Gaussian { mass } => p / mass,
            KineticsSpec::Hyperbolic { speed, .. } => {
                let v = p / self.mass1(p);
                // Rounding saturates p/M(p) to exactly c once |p| >> mc.
                if v.abs() >= speed {
                    speed.next_down().copysign(p)
                } else {
                    v
                }
            }
        }
    }

    /// Total kinetic energy `K(p)`.
    pub fn kinetic_energy(&self, p: &[f64]) -> Result<f64> {
        ensure_finite(p, "momentum")?;
        Ok(p.iter().map(|&pi| self.energy1(pi)).sum())
    }

    /// Parameter velocity `grad K(p)`, elementwise.
    pub fn velocity(&self, p: &[f64]) -> Result<Vec<f64>> {
        ensure_finite(p, "momentum")?;
        Ok(p.iter().map(|&pi| self.velocity1(pi)).collect())
    }

    /// Position-dependent mass `M(p)`, elementwise.
    pub fn mass(&self, p: &[f64]) -> Result<Vec<f64>> {
        ensure_finite(p, "momentum")?;
        Ok(p.iter().map(|&pi| self.mass1(pi)).collect())
    }
}
