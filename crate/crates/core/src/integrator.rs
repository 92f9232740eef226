//! Split-operator integrator.
//!
//! The dynamics split into a drift `A` (parameters and temperatures move,
//! momentum fixed) and a momentum update `B`, which is a constant-coefficient
//! Ornstein–Uhlenbeck process over the substep and is solved exactly:
//!
//! ```text
//! p' = exp(-beta h) p - g (1 - exp(-beta h)) / beta + sqrt(M alpha (1 - exp(-2 beta h)) / beta) eta
//! ```
//!
//! `strang_step` is `B(h/2) A(h) B(h/2)`. `fused_step` is `B(h) A(h)`, the
//! loop body obtained by merging the trailing half kick of one Strang step
//! with the leading half kick of the next.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::kinetics::KineticsSpec;
use crate::thermostat::Friction;

/// Below this `|beta h|` the OU coefficients use their two-term series.
const SERIES_THRESHOLD: f64 = 1e-8;

/// Position `theta`, momentum `p`, temperature `xi` and the clock `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub xi: Vec<f64>,
    pub t: f64,
}

impl SamplerState {
    /// Zero momentum and zero temperature at `theta`.
    pub fn new(theta: Vec<f64>) -> Self {
        let d = theta.len();
        Self {
            theta,
            p: vec![0.0; d],
            xi: vec![0.0; d],
            t: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.theta.len();
        if self.p.len() != d || self.xi.len() != d {
            return Err(Error::Config(format!(
                "state length mismatch: theta {d}, p {}, xi {}",
                self.p.len(),
                self.xi.len()
            )));
        }
        ensure_finite(&self.theta, "theta")?;
        ensure_finite(&self.p, "momentum")?;
        ensure_finite(&self.xi, "temperature")?;
        if !self.t.is_finite() {
            return Err(Error::invalid(0, "clock is not finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSizeSchedule {
    Constant { h0: f64 },
    /// `h = h0 (1 + cos(pi (s mod n) / n)) / 2` for step index `s`.
    Cyclic { h0: f64, cycle: u64 },
}

impl StepSizeSchedule {
    pub fn validate(&self) -> Result<()> {
        let h0 = self.base();
        if !(h0.is_finite() && h0 > 0.0) {
            return Err(Error::Config(format!("step size h0 must be positive, got {h0}")));
        }
        if let StepSizeSchedule::Cyclic { cycle: 0, .. } = self {
            return Err(Error::Config("cycle length must be positive".into()));
        }
        Ok(())
    }

    pub fn base(&self) -> f64 {
        match *self {
            StepSizeSchedule::Constant { h0 } | StepSizeSchedule::Cyclic { h0, .. } => h0,
        }
    }

    pub fn step_size(&self, step: u64) -> f64 {
        match *self {
            StepSizeSchedule::Constant { h0 } => h0,
            StepSizeSchedule::Cyclic { h0, cycle } => {
                let phase = (step % cycle) as f64 / cycle as f64;
                h0 * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos())
            }
        }
    }

    /// Whether `step` is the last (smallest-step) step of a cycle.
    pub fn is_cycle_end(&self, step: u64) -> bool {
        match *self {
            StepSizeSchedule::Constant { .. } => false,
            StepSizeSchedule::Cyclic { cycle, .. } => step % cycle == cycle - 1,
        }
    }
}

/// `(1 - exp(-a beta h)) / beta`, the OU decay coefficient; tends to `a h` as `beta -> 0`.
#[inline]
pub fn ou_coefficient(a: u32, beta: f64, h: f64) -> f64 {
    let a = f64::from(a);
    let bh = beta * h;
    if bh.abs() < SERIES_THRESHOLD {
        a * h - 0.5 * a * a * bh * h
    } else {
        -(-a * bh).exp_m1() / beta
    }
}

/// Drift of positions and temperatures by `h` at fixed momentum.
///
/// `theta += h v(p)`, `xi += h (p v(p) - 1)`. Any finite `h` is accepted; a
/// negative value undoes a previous drift.
pub fn operator_a(state: &mut SamplerState, h: f64, kin: &KineticsSpec) -> Result<()> {
    drift(state, h, kin, true)
}

fn drift(state: &mut SamplerState, h: f64, kin: &KineticsSpec, evolve_temperature: bool) -> Result<()> {
    let SamplerState { theta, p, xi, .. } = state;
    for i in 0..theta.len() {
        let v = kin.velocity1(p[i]);
        theta[i] += h * v;
        if evolve_temperature {
            xi[i] += h * (p[i] * v - 1.0);
        }
        if !theta[i].is_finite() || !xi[i].is_finite() {
            return Err(Error::invalid(
                i,
                format!("drift produced theta={} xi={} (p={})", theta[i], xi[i], p[i]),
            ));
        }
    }
    Ok(())
}

/// Friction statistics of one momentum update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickStats {
    pub beta_mean: f64,
    pub beta_min: f64,
}

/// Exact OU momentum update over `h` with `alpha`, `beta` and `M(p)` frozen
/// at their entry values. Draws one standard normal per component even when
/// `alpha = 0`, so random streams stay aligned across policies.
pub fn operator_b<R: Rng + ?Sized>(
    state: &mut SamplerState,
    h: f64,
    grad: &[f64],
    friction: &Friction,
    kin: &KineticsSpec,
    rng: &mut R,
) -> Result<KickStats> {
    if grad.len() != state.p.len() {
        return Err(Error::Config(format!(
            "gradient length {} does not match state dimension {}",
            grad.len(),
            state.p.len()
        )));
    }
    let mut beta_sum = 0.0;
    let mut beta_min = f64::INFINITY;
    for (i, (p, &g)) in state.p.iter_mut().zip(grad).enumerate() {
        let eta: f64 = rng.sample(StandardNormal);
        let (alpha, beta) = friction.coefficients(state.xi[i]);
        beta_sum += beta;
        beta_min = beta_min.min(beta);
        if h == 0.0 {
            continue;
        }
        let mass = kin.mass1(*p);
        let decay = (-beta * h).exp();
        let gamma1 = ou_coefficient(1, beta, h);
        let gamma2 = ou_coefficient(2, beta, h);
        let next = decay * *p - gamma1 * g + (mass * alpha * gamma2).sqrt() * eta;
        if !next.is_finite() {
            return Err(Error::invalid(
                i,
                format!("momentum update diverged: p={} beta={beta} |g|={}", *p, g.abs()),
            ));
        }
        *p = next;
    }
    let n = state.p.len().max(1) as f64;
    Ok(KickStats {
        beta_mean: beta_sum / n,
        beta_min,
    })
}

/// Anything that can produce `grad L~(theta)` for the integrator.
pub trait GradientSource {
    fn gradient(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<()>;
}

impl<F> GradientSource for F
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    fn gradient(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<()> {
        self(theta, grad)
    }
}

/// Kinetics and friction bound together, with a gradient scratch buffer.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub kinetics: KineticsSpec,
    pub friction: Friction,
    grad: Vec<f64>,
}

impl Integrator {
    pub fn new(kinetics: KineticsSpec, friction: Friction) -> Self {
        Self {
            kinetics,
            friction,
            grad: Vec::new(),
        }
    }

    /// Drift `A(h)`; temperatures stay frozen under fixed friction.
    pub fn drift(&self, state: &mut SamplerState, h: f64) -> Result<()> {
        drift(state, h, &self.kinetics, self.friction.evolves_temperature())
    }

    /// Momentum update `B(h)` with a fresh gradient at the current `theta`.
    pub fn kick<G, R>(&mut self, state: &mut SamplerState, h: f64, source: &mut G, rng: &mut R) -> Result<KickStats>
    where
        G: GradientSource + ?Sized,
        R: Rng + ?Sized,
    {
        self.grad.resize(state.dim(), 0.0);
        source.gradient(&state.theta, &mut self.grad)?;
        operator_b(state, h, &self.grad, &self.friction, &self.kinetics, rng)
    }

    /// `B(h/2) A(h) B(h/2)`; advances the clock by `h`.
    pub fn strang_step<G, R>(&mut self, state: &mut SamplerState, h: f64, source: &mut G, rng: &mut R) -> Result<KickStats>
    where
        G: GradientSource + ?Sized,
        R: Rng + ?Sized,
    {
        let first = self.kick(state, 0.5 * h, source, rng)?;
        self.drift(state, h)?;
        let second = self.kick(state, 0.5 * h, source, rng)?;
        state.t += h;
        Ok(KickStats {
            beta_mean: 0.5 * (first.beta_mean + second.beta_mean),
            beta_min: first.beta_min.min(second.beta_min),
        })
    }

    /// `B(h) A(h)` with a single gradient evaluation; advances the clock by `h`.
    pub fn fused_step<G, R>(&mut self, state: &mut SamplerState, h: f64, source: &mut G, rng: &mut R) -> Result<KickStats>
    where
        G: GradientSource + ?Sized,
        R: Rng + ?Sized,
    {
        let stats = self.kick(state, h, source, rng)?;
        self.drift(state, h)?;
        state.t += h;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermostat::ThermostatPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss(m: f64) -> KineticsSpec {
        KineticsSpec::gaussian(m).unwrap()
    }

    fn fixed(alpha: f64, beta: f64) -> Friction {
        Friction::Fixed { alpha, beta }
    }

    fn state1(theta: f64, p: f64, xi: f64) -> SamplerState {
        SamplerState {
            theta: vec![theta],
            p: vec![p],
            xi: vec![xi],
            t: 0.0,
        }
    }

    fn quadratic(theta: &[f64], g: &mut [f64]) -> Result<()> {
        g.copy_from_slice(theta);
        Ok(())
    }

    #[test]
    fn step_size_examples() {
        let s = StepSizeSchedule::Cyclic { h0: 0.001, cycle: 100 };
        assert_eq!(s.step_size(0), 0.001);
        assert!((s.step_size(50) - 0.0005).abs() < 1e-18);
        let expected = 0.001 * 0.5 * (1.0 + (0.99 * std::f64::consts::PI).cos());
        assert!((s.step_size(99) - expected).abs() < 1e-20);
        assert!((s.step_size(99) - 2.467e-7).abs() < 1e-10);
        assert_eq!(s.step_size(100), 0.001);
        assert!(s.is_cycle_end(99) && s.is_cycle_end(199) && !s.is_cycle_end(100));
        assert_eq!(StepSizeSchedule::Constant { h0: 0.3 }.step_size(12345), 0.3);
    }

    #[test]
    fn schedule_stays_in_range() {
        let s = StepSizeSchedule::Cyclic { h0: 0.01, cycle: 37 };
        for step in 0..1000 {
            let h = s.step_size(step);
            assert!(h > 0.0 && h <= 0.01);
        }
        assert!(StepSizeSchedule::Cyclic { h0: 0.01, cycle: 0 }.validate().is_err());
        assert!(StepSizeSchedule::Constant { h0: -1.0 }.validate().is_err());
    }

    #[test]
    fn ou_coefficient_examples() {
        assert_eq!(ou_coefficient(1, 0.0, 0.1), 0.1);
        assert!((ou_coefficient(1, 2.0, 0.1) - (1.0 - (-0.2f64).exp()) / 2.0).abs() < 1e-16);
        assert!((ou_coefficient(1, 2.0, 0.1) - 0.0906346).abs() < 1e-7);
        assert!((ou_coefficient(2, 1.0, 0.05) - 0.0951626).abs() < 1e-7);
        // Both branches agree across the series threshold.
        let h = 0.5;
        for &beta in &[1.9e-8, 2.1e-8, -1.9e-8, -2.1e-8] {
            let series = 2.0 * h - 2.0 * beta * h * h;
            assert!((ou_coefficient(2, beta, h) - series).abs() < 1e-15);
        }
    }

    #[test]
    fn operator_a_examples() {
        let mut s = state1(0.0, 2.0, 0.0);
        operator_a(&mut s, 0.5, &gauss(1.0)).unwrap();
        assert_eq!((s.theta[0], s.xi[0]), (1.0, 1.5));

        let mut s = state1(0.3, -1.2, 0.7);
        let before = s.clone();
        operator_a(&mut s, 0.0, &gauss(1.0)).unwrap();
        assert_eq!(s, before);

        let mut s = state1(0.0, 1.0, 0.0);
        operator_a(&mut s, 1.0, &KineticsSpec::hyperbolic(1.0, 1.0).unwrap()).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((s.theta[0] - r).abs() < 1e-15);
        assert!((s.xi[0] - (r - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn operator_a_reverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kin in [gauss(0.7), KineticsSpec::hyperbolic(1.5, 0.4).unwrap()] {
            for _ in 0..100 {
                let mut s = SamplerState {
                    theta: (0..4).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    p: (0..4).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    xi: (0..4).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    t: 0.0,
                };
                let orig = s.clone();
                let h = rng.random_range(0.0..0.5);
                operator_a(&mut s, h, &kin).unwrap();
                operator_a(&mut s, -h, &kin).unwrap();
                for (a, b) in s.theta.iter().chain(&s.xi).zip(orig.theta.iter().chain(&orig.xi)) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
                assert_eq!(s.p, orig.p);
            }
        }
    }

    #[test]
    fn operator_b_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = state1(0.0, 1.0, 0.0);
        operator_b(&mut s, 0.1, &[0.0], &fixed(0.0, 1.0), &gauss(1.0), &mut rng).unwrap();
        assert!((s.p[0] - (-0.1f64).exp()).abs() < 1e-15);

        let mut s = state1(0.4, 1.3, 0.2);
        let before = s.clone();
        let f = Friction::Thermostat(ThermostatPolicy::atmc(1.0).unwrap());
        operator_b(&mut s, 0.0, &[5.0], &f, &gauss(1.0), &mut rng).unwrap();
        assert_eq!(s, before);

        let mut s = state1(0.0, 0.0, 0.0);
        operator_b(&mut s, 0.1, &[3.0], &fixed(0.0, 0.0), &gauss(1.0), &mut rng).unwrap();
        assert!((s.p[0] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn operator_b_rejects_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = state1(0.0, 1e300, -1e3);
        let f = Friction::Thermostat(ThermostatPolicy::nose_hoover(0.0).unwrap());
        let err = operator_b(&mut s, 1.0, &[0.0], &f, &gauss(1.0), &mut rng).unwrap_err();
        assert!(matches!(err, Error::InvalidState { component: 0, .. }));
        let mut s = state1(0.0, 0.0, 0.0);
        assert!(operator_b(&mut s, 0.1, &[1.0, 2.0], &f, &gauss(1.0), &mut rng).is_err());
    }

    #[test]
    fn operator_b_transition_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let mut s = state1(0.0, 0.0, 0.0);
                operator_b(&mut s, 0.5, &[0.0], &fixed(1.0, 1.0), &gauss(1.0), &mut rng).unwrap();
                s.p[0]
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = 1.0 - (-1.0f64).exp();
        let se = expected * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "var={var} expected={expected}");
    }

    #[test]
    fn strang_matches_velocity_verlet() {
        let mut integ = Integrator::new(gauss(1.0), fixed(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = state1(1.0, 0.0, 0.0);
        let h = 0.1;
        integ.strang_step(&mut s, h, &mut quadratic, &mut rng).unwrap();
        // Half kick, drift, half kick:
        let p_half = -0.5 * h * 1.0;
        let theta = 1.0 + h * p_half;
        let p = p_half - 0.5 * h * theta;
        assert!((s.theta[0] - theta).abs() < 1e-15);
        assert!((s.p[0] - p).abs() < 1e-15);
        assert!((s.theta[0] - 0.995).abs() < 1e-15);
        assert!((s.p[0] + 0.09975).abs() < 1e-15);
        assert!((s.t - h).abs() < 1e-15);
    }

    #[test]
    fn zero_step_is_identity() {
        let f = Friction::Thermostat(ThermostatPolicy::atmc(1.0).unwrap());
        let mut integ = Integrator::new(gauss(1.0), f);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = state1(0.7, -0.4, 0.3);
        let mut s = start.clone();
        integ.strang_step(&mut s, 0.0, &mut quadratic, &mut rng).unwrap();
        assert_eq!(s, start);
        integ.fused_step(&mut s, 0.0, &mut quadratic, &mut rng).unwrap();
        assert_eq!(s, start);
    }

    #[test]
    fn fused_without_forces_is_drift() {
        let f = Friction::Thermostat(ThermostatPolicy::new(crate::thermostat::ThermostatKind::None, 0.0).unwrap());
        let mut integ = Integrator::new(gauss(2.0), f);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut zero = |_: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            Ok(())
        };
        let mut s = state1(0.1, 0.8, -0.2);
        let mut expected = s.clone();
        integ.fused_step(&mut s, 0.25, &mut zero, &mut rng).unwrap();
        operator_a(&mut expected, 0.25, &gauss(2.0)).unwrap();
        assert_eq!(s.theta, expected.theta);
        assert_eq!(s.xi, expected.xi);
        assert_eq!(s.p, expected.p);
    }

    #[test]
    fn fused_chain_reproduces_strang_composition() {
        // Zero noise: B(h/2) A (BA)^(k-1) B(h/2) equals k Strang steps.
        // Nose-Hoover with D = 0 has alpha = 0 and temperature-driven friction.
        let f = Friction::Thermostat(ThermostatPolicy::nose_hoover(0.0).unwrap());
        let kin = gauss(1.0);
        let h = 0.1;
        let k = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut integ = Integrator::new(kin, f);

        let mut strang = state1(1.0, 0.3, 0.2);
        for _ in 0..k {
            integ.strang_step(&mut strang, h, &mut quadratic, &mut rng).unwrap();
        }

        let mut fused = state1(1.0, 0.3, 0.2);
        integ.kick(&mut fused, 0.5 * h, &mut quadratic, &mut rng).unwrap();
        integ.drift(&mut fused, h).unwrap();
        fused.t += h;
        for _ in 1..k {
            integ.fused_step(&mut fused, h, &mut quadratic, &mut rng).unwrap();
        }
        integ.kick(&mut fused, 0.5 * h, &mut quadratic, &mut rng).unwrap();

        for (a, b) in [
            (&strang.theta, &fused.theta),
            (&strang.p, &fused.p),
            (&strang.xi, &fused.xi),
        ] {
            assert!((a[0] - b[0]).abs() < 1e-14, "{a:?} vs {b:?}");
        }
        assert!((strang.t - fused.t).abs() < 1e-15);
    }

    #[test]
    fn fixed_friction_freezes_temperature() {
        let mut integ = Integrator::new(gauss(1.0), fixed(1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = state1(1.0, 2.0, 0.0);
        for _ in 0..100 {
            let stats = integ.fused_step(&mut s, 0.1, &mut quadratic, &mut rng).unwrap();
            assert_eq!(stats.beta_mean, 1.0);
        }
        assert_eq!(s.xi, vec![0.0]);
    }

    #[test]
    fn identical_seeds_identical_chains() {
        let run = || {
            let f = Friction::Thermostat(ThermostatPolicy::atmc(1.0).unwrap());
            let mut integ = Integrator::new(KineticsSpec::hyperbolic(1.0, 2.0).unwrap(), f);
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut s = SamplerState::new(vec![0.5, -0.5, 2.0]);
            for _ in 0..1000 {
                integ.fused_step(&mut s, 0.05, &mut quadratic, &mut rng).unwrap();
            }
            s
        };
        let (a, b) = (run(), run());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.theta), bits(&b.theta));
        assert_eq!(bits(&a.p), bits(&b.p));
        assert_eq!(bits(&a.xi), bits(&b.xi));
    }
}
