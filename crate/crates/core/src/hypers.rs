//! Hyperparameters derived from the base step size.

use serde::Serialize;

use crate::error::{Error, Result};

/// Target mean speed per step.
pub const MEAN_SPEED: f64 = 0.0003;
/// Maximum speed per step.
pub const MAX_SPEED: f64 = 0.001;
/// Minimum per-step momentum retention under friction `D`.
pub const RETENTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedHypers {
    pub h0: f64,
    pub mass: f64,
    pub speed: f64,
    pub noise: f64,
    /// `exp(-D h0)`.
    pub retention: f64,
}

/// `m = (0.0003 / h0)^-2`, `c = 0.001 / h0`, `D = -ln(0.9) / h0`.
pub fn derive_hypers(h0: f64) -> Result<DerivedHypers> {
    if !(h0.is_finite() && h0 > 0.0) {
        return Err(Error::Config(format!("h0 must be positive, got {h0}")));
    }
    let noise = -RETENTION.ln() / h0;
    Ok(DerivedHypers {
        h0,
        mass: (MEAN_SPEED / h0).powi(-2),
        speed: MAX_SPEED / h0,
        noise,
        retention: (-noise * h0).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conventions_at_reference_step() {
        let d = derive_hypers(0.001).unwrap();
        assert!((d.mass - 100.0 / 9.0).abs() < 1e-9);
        assert!((d.speed - 1.0).abs() < 1e-12);
        assert!((d.noise - 105.360_515_657_826_3).abs() < 1e-6);
        assert!((d.retention - 0.9).abs() < 1e-12);
    }

    #[test]
    fn retention_is_step_invariant() {
        for h0 in [0.0005, 0.01, 1e-6, 0.3] {
            let d = derive_hypers(h0).unwrap();
            assert!((d.retention - 0.9).abs() < 1e-12);
        }
        assert!((derive_hypers(0.0005).unwrap().speed - 2.0).abs() < 1e-12);
        assert!(derive_hypers(0.0).is_err());
        assert!(derive_hypers(f64::NAN).is_err());
    }
}
