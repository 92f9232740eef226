//! Fixtures shared by the benchmarks.

use atmc_core::targets::{fixup_init, two_moons};
use atmc_core::{KineticsSpec, Method, MlpClassifier, MlpConfig, SamplerConfig, StepSizeSchedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Constant-step sampler config with Gaussian kinetics.
pub fn sampler_config(method: Method, h: f64, steps: u64) -> SamplerConfig {
    let kinetics = KineticsSpec::gaussian(1.0).expect("unit mass is valid");
    let mut config = SamplerConfig::new(method, kinetics, StepSizeSchedule::Constant { h0: h }, 1.0, steps, 7);
    config.burn_in_steps = 0;
    config
}

/// A two-moons classifier and an initial parameter vector.
pub fn moons_model(n: usize, width: usize, blocks: usize) -> (MlpClassifier, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = two_moons(n, 0.2, &mut rng);
    let model = MlpClassifier::new(MlpConfig::new(2, width, blocks, 2), data).expect("valid config");
    let theta = fixup_init(&model, 0.1, &mut rng);
    (model, theta)
}
