//! Adaptive-thermostat Monte Carlo (ATMC) and related stochastic-gradient
//! samplers.
//!
//! The sampler state is `(theta, p, xi)`. Each iteration applies an exact
//! Ornstein–Uhlenbeck momentum update followed by a drift of parameters and
//! temperatures. The ATMC thermostat splits friction into
//! `alpha(xi) = max(D - xi, 0)` and `beta(xi) = max(D, xi)`, so friction
//! never drops below `D`.

pub mod error;
pub mod gradnoise;
pub mod hypers;
pub mod integrator;
pub mod kinetics;
pub mod oracle;
pub mod posterior;
pub mod sampler;
pub mod targets;
pub mod thermostat;

pub use error::{Error, Result};
pub use gradnoise::NoiseModel;
pub use hypers::{derive_hypers, DerivedHypers};
pub use integrator::{operator_a, operator_b, ou_coefficient, GradientSource, Integrator, KickStats, SamplerState, StepSizeSchedule};
pub use kinetics::KineticsSpec;
pub use posterior::{accuracy, calibration, nll, posterior_predictive, Binning, CalibrationReport, PredictiveEnsemble};
pub use sampler::{make_sampler, run_chain, run_chains, Chain, ChainRun, Collect, Method, SampleRecord, SamplerConfig};
pub use targets::{Batch, BayesLinRegTarget, Classifier, Dataset, GaussianTarget, MlpClassifier, MlpConfig, Target};
pub use thermostat::{Friction, ThermostatKind, ThermostatPolicy};
