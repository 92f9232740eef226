//! Named samplers assembled from the shared integrator, and chain drivers.

pub mod persist;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::gradnoise::NoiseModel;
use crate::integrator::{GradientSource, Integrator, SamplerState, StepSizeSchedule};
use crate::kinetics::KineticsSpec;
use crate::targets::{Batch, Target};
use crate::thermostat::{Friction, ThermostatPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Atmc,
    Sgnht,
    Sgld,
    Sghmc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Atmc, Method::Sgnht, Method::Sgld, Method::Sghmc];

    pub fn label(self) -> &'static str {
        match self {
            Method::Atmc => "ATMC",
            Method::Sgnht => "SGNHT",
            Method::Sgld => "SGLD",
            Method::Sghmc => "SGHMC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown sampler method {s:?} (expected atmc, sgnht, sgld or sghmc)")))
    }
}

/// When a chain snapshots its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Collect {
    /// The last step of every step-size cycle after burn-in.
    CycleEnd,
    /// Every `k`-th step after burn-in.
    EveryK { k: u64 },
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    pub kinetics: KineticsSpec,
    pub schedule: StepSizeSchedule,
    /// Momentum noise `D`.
    pub noise: f64,
    pub burn_in_steps: u64,
    pub collect: Collect,
    pub seed: u64,
    pub total_steps: u64,
    /// Minibatch size; `None` evaluates the full dataset each step.
    pub batch_size: Option<usize>,
    /// Initial temperature for every component (default 0).
    pub xi0: Option<f64>,
    /// Emit a diagnostic record every this many steps; 0 emits only at collections.
    pub log_every: u64,
}

impl SamplerConfig {
    /// Defaults: burn-in 15% of `total_steps`, no collection, full batches.
    pub fn new(method: Method, kinetics: KineticsSpec, schedule: StepSizeSchedule, noise: f64, total_steps: u64, seed: u64) -> Self {
        Self {
            method,
            kinetics,
            schedule,
            noise,
            burn_in_steps: total_steps * 15 / 100,
            collect: Collect::Never,
            seed,
            total_steps,
            batch_size: None,
            xi0: None,
            log_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kinetics.validate()?;
        self.schedule.validate()?;
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("momentum noise D must be non-negative, got {}", self.noise)));
        }
        if self.total_steps > 0 && self.total_steps <= self.burn_in_steps {
            return Err(Error::Config(format!(
                "total_steps ({}) must exceed burn_in_steps ({})",
                self.total_steps, self.burn_in_steps
            )));
        }
        match self.collect {
            Collect::EveryK { k: 0 } => return Err(Error::Config("collection interval must be positive".into())),
            Collect::CycleEnd if matches!(self.schedule, StepSizeSchedule::Constant { .. }) => {
                return Err(Error::Config("cycle-end collection needs a cyclic schedule".into()))
            }
            _ => {}
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.xi0.is_some_and(|x| !x.is_finite()) {
            return Err(Error::Config("xi0 must be finite".into()));
        }
        Ok(())
    }

    pub fn is_collection_step(&self, step: u64) -> bool {
        if step < self.burn_in_steps {
            return false;
        }
        match self.collect {
            Collect::CycleEnd => self.schedule.is_cycle_end(step),
            Collect::EveryK { k } => (step + 1) % k == 0,
            Collect::Never => false,
        }
    }
}

/// Momentum-based integrator for the method, or `None` for SGLD.
pub fn make_sampler(config: &SamplerConfig) -> Result<Option<Integrator>> {
    let friction = match config.method {
        Method::Atmc => Friction::Thermostat(ThermostatPolicy::atmc(config.noise)?),
        Method::Sgnht => Friction::Thermostat(ThermostatPolicy::nose_hoover(config.noise)?),
        Method::Sghmc => Friction::Fixed {
            alpha: config.noise,
            beta: config.noise,
        },
        Method::Sgld => return Ok(None),
    };
    Ok(Some(Integrator::new(config.kinetics, friction)))
}

/// Diagnostics of one chain step, plus the parameters at collection events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub step: u64,
    /// Seconds since the chain started.
    pub wall_time: f64,
    pub h: f64,
    /// Minibatch estimate of the loss at the kick.
    pub loss: f64,
    pub kinetic: f64,
    pub xi_mean_abs: f64,
    pub beta_mean: f64,
    pub beta_min: f64,
    pub collected: bool,
    pub theta: Option<Vec<f64>>,
}

/// Minibatch gradient of a target with optional injected noise.
pub struct StochasticGradient<'a> {
    target: &'a dyn Target,
    noise: &'a NoiseModel,
    batch_size: Option<usize>,
    rng: ChaCha8Rng,
    indices: Vec<usize>,
    pub last_loss: f64,
}

impl<'a> StochasticGradient<'a> {
    pub fn new(target: &'a dyn Target, noise: &'a NoiseModel, batch_size: Option<usize>, rng: ChaCha8Rng) -> Self {
        Self {
            target,
            noise,
            batch_size,
            rng,
            indices: Vec::new(),
            last_loss: f64::NAN,
        }
    }
}

impl GradientSource for StochasticGradient<'_> {
    fn gradient(&mut self, theta: &[f64], grad: &mut [f64]) -> Result<()> {
        let n = self.target.num_examples();
        let batch = match self.batch_size {
            Some(b) if n > 0 && b < n => {
                self.indices.clear();
                self.indices
                    .extend(rand::seq::index::sample(&mut self.rng, n, b));
                Batch::Indices(&self.indices)
            }
            _ => Batch::Full,
        };
        self.last_loss = self.target.minibatch_gradient(theta, batch, grad)?;
        if !self.last_loss.is_finite() {
            return Err(Error::invalid(0, format!("loss is {}", self.last_loss)));
        }
        self.noise.perturb(grad, &mut self.rng)?;
        ensure_finite(grad, "gradient")
    }
}

/// Summary of one completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: u64,
    pub h: f64,
    pub loss: f64,
    pub beta_mean: f64,
    pub beta_min: f64,
}

/// A single chain advanced one step at a time.
pub struct Chain<'a> {
    config: SamplerConfig,
    integrator: Option<Integrator>,
    source: StochasticGradient<'a>,
    state: SamplerState,
    rng: ChaCha8Rng,
    step: u64,
    beta_min: f64,
    grad: Vec<f64>,
}

impl<'a> Chain<'a> {
    /// Starts at `target.initial_theta`, with zero momentum and temperatures
    /// `xi0` (default 0).
    pub fn new(config: &SamplerConfig, target: &'a dyn Target, noise: &'a NoiseModel) -> Result<Self> {
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        init_rng.set_stream(2);
        let theta = target.initial_theta(&mut init_rng);
        Self::with_theta(config, target, noise, theta)
    }

    pub fn with_theta(config: &SamplerConfig, target: &'a dyn Target, noise: &'a NoiseModel, theta: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if theta.len() != target.dim() {
            return Err(Error::Config(format!(
                "initial parameters have length {}, target expects {}",
                theta.len(),
                target.dim()
            )));
        }
        let mut state = SamplerState::new(theta);
        if let Some(xi0) = config.xi0 {
            state.xi.fill(xi0);
        }
        state.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut grad_rng = ChaCha8Rng::seed_from_u64(config.seed);
        grad_rng.set_stream(1);
        Ok(Self {
            config: config.clone(),
            integrator: make_sampler(config)?,
            source: StochasticGradient::new(target, noise, config.batch_size, grad_rng),
            state,
            rng,
            step: 0,
            beta_min: f64::INFINITY,
            grad: vec![0.0; target.dim()],
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    /// Index of the next step to run.
    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// Smallest friction coefficient seen so far over all steps and components.
    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn step(&mut self) -> Result<StepInfo> {
        let step = self.step;
        let h = self.config.schedule.step_size(step);
        let (beta_mean, beta_min) = match &mut self.integrator {
            Some(integrator) => {
                let stats = integrator
                    .fused_step(&mut self.state, h, &mut self.source, &mut self.rng)
                    .map_err(|e| e.at_step(step))?;
                (stats.beta_mean, stats.beta_min)
            }
            None => {
                self.source
                    .gradient(&self.state.theta, &mut self.grad)
                    .map_err(|e| e.at_step(step))?;
                let scale = (2.0 * h).sqrt();
                for (i, (t, g)) in self.state.theta.iter_mut().zip(&self.grad).enumerate() {
                    let eta: f64 = self.rng.sample(StandardNormal);
                    *t += -h * g + scale * eta;
                    if !t.is_finite() {
                        return Err(Error::invalid(i, "parameter update diverged").at_step(step));
                    }
                }
                self.state.t += h;
                (0.0, 0.0)
            }
        };
        self.beta_min = self.beta_min.min(beta_min);
        self.step += 1;
        Ok(StepInfo {
            step,
            h,
            loss: self.source.last_loss,
            beta_mean,
            beta_min,
        })
    }

    fn record(&self, info: &StepInfo, collected: bool, start: Instant) -> Result<SampleRecord> {
        let kinetic = if self.integrator.is_some() {
            self.config.kinetics.kinetic_energy(&self.state.p)?
        } else {
            0.0
        };
        let d = self.state.dim().max(1) as f64;
        Ok(SampleRecord {
            step: info.step,
            wall_time: start.elapsed().as_secs_f64(),
            h: info.h,
            loss: info.loss,
            kinetic,
            xi_mean_abs: self.state.xi.iter().map(|x| x.abs()).sum::<f64>() / d,
            beta_mean: info.beta_mean,
            beta_min: info.beta_min,
            collected,
            theta: collected.then(|| self.state.theta.clone()),
        })
    }
}

/// Outcome of [`run_chain`]. A numerical failure stops the chain and lands in
/// `abort`; the records up to the last healthy step are kept.
#[derive(Debug)]
pub struct ChainRun {
    pub records: Vec<SampleRecord>,
    pub final_state: SamplerState,
    pub beta_min: f64,
    pub abort: Option<Error>,
}

impl ChainRun {
    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().filter_map(|r| r.theta.as_deref())
    }
}

/// Runs a chain, handing each record to `sink` as it is produced.
pub fn run_chain_with<F>(config: &SamplerConfig, target: &dyn Target, noise: &NoiseModel, mut sink: F) -> Result<ChainRun>
where
    F: FnMut(&SampleRecord) -> Result<()>,
{
    let mut chain = Chain::new(config, target, noise)?;
    let start = Instant::now();
    let mut records = Vec::new();
    let mut abort = None;
    for _ in 0..config.total_steps {
        let info = match chain.step() {
            Ok(info) => info,
            Err(e) => {
                abort = Some(e);
                break;
            }
        };
        let collected = config.is_collection_step(info.step);
        let logged = config.log_every > 0 && info.step % config.log_every == 0;
        if collected || logged {
            let record = chain.record(&info, collected, start)?;
            sink(&record)?;
            records.push(record);
        }
    }
    Ok(ChainRun {
        records,
        final_state: chain.state,
        beta_min: chain.beta_min,
        abort,
    })
}

pub fn run_chain(config: &SamplerConfig, target: &dyn Target, noise: &NoiseModel) -> Result<ChainRun> {
    run_chain_with(config, target, noise, |_| Ok(()))
}

/// Independent chains, one per seed, on scoped worker threads. Results come
/// back in seed order.
pub fn run_chains(config: &SamplerConfig, seeds: &[u64], target: &dyn Target, noise: &NoiseModel) -> Vec<Result<ChainRun>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let config = SamplerConfig { seed, ..config.clone() };
                scope.spawn(move || run_chain(&config, target, noise))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("chain worker panicked".into()))))
            .collect()
    })
}
