//! Flat `section.key = value` experiment configs.
//!
//! ```text
//! # comment
//! seed = 3
//! target.kind = mlp
//! target.dataset = data/train.csv
//! sampler.method = atmc
//! sampler.h0 = 0.001
//! ```

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use atmc_core::posterior::Binning;
use atmc_core::sampler::{Collect, Method, SamplerConfig};
use atmc_core::targets::{two_moons, MlpConfig, PriorConfig};
use atmc_core::{derive_hypers, BayesLinRegTarget, Dataset, GaussianTarget, KineticsSpec, MlpClassifier, NoiseModel, StepSizeSchedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Keys excluded from the config hash: they choose where and with which
/// seed a run happens, not what it computes. Dataset paths are replaced by
/// a digest of the file contents.
fn hashed(key: &str) -> bool {
    !matches!(key, "seed" | "output.dir") && !key.ends_with(".dataset")
}

/// Parsed key-value pairs; every lookup is recorded so leftovers can be
/// reported as unknown keys.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

fn field_error(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {message}"))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1)))?;
            let key = key.trim();
            let valid = !key.is_empty()
                && key.split('.').all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
            if !valid {
                return Err(CliError::Config(format!("line {}: invalid key {key:?}", i + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(field_error(key, "given more than once"));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| field_error(key, format!("cannot parse {v:?}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| field_error(key, "required"))
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        let v = match default {
            Some(d) => self.get_or(key, d)?,
            None => self.require(key)?,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(field_error(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    /// Comma-separated numbers; a single value is broadcast by the caller.
    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| field_error(key, format!("cannot parse {x:?}: {e}"))))
                    .collect()
            })
            .transpose()
    }

    fn reject_unknown(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.entries.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(field_error(k, "unknown key")),
            None => Ok(()),
        }
    }

    /// `key = value` lines in key order.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn digest(&self, keep: impl Fn(&str) -> bool, extra: &[u8]) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.entries.iter().filter(|(k, _)| keep(k)) {
            hasher.update(format!("{k} = {v}\n").as_bytes());
        }
        hasher.update(extra);
        hex::encode(hasher.finalize())
    }
}

/// Where examples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    TwoMoons { n: usize, jitter: f64, seed: u64 },
}

impl DataSource {
    pub fn load(&self, expected_features: Option<usize>) -> Result<Dataset, CliError> {
        match self {
            DataSource::File(path) => Ok(Dataset::load(path, expected_features)?),
            DataSource::TwoMoons { n, jitter, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(two_moons(*n, *jitter, &mut rng))
            }
        }
    }

    fn fingerprint(&self) -> Result<Vec<u8>, CliError> {
        match self {
            DataSource::File(path) => {
                let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                Ok(Sha256::digest(&bytes).to_vec())
            }
            DataSource::TwoMoons { .. } => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    LinReg { n: usize, dim: usize, noise_var: f64, prior_var: f64, data_seed: u64 },
    Mlp { width: usize, blocks: usize, classes: Option<usize>, kappa: f64, prior: PriorConfig, train: DataSource },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    None,
    /// Per-evaluation standard deviation.
    Sigma(f64),
    /// Implied diffusion covariance `B = sigma^2 h0`.
    ImpliedB(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub test: Option<DataSource>,
    pub binning: Binning,
    /// Also report every collected sample on its own.
    pub individual: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub sampler: SamplerConfig,
    pub noise: NoiseSpec,
    pub eval: EvalSpec,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub raw: RawConfig,
    /// Directory that relative paths are resolved against.
    pub base_dir: PathBuf,
}

/// A constructed target; the classifier variant supports evaluation.
pub enum BuiltTarget {
    Gaussian(GaussianTarget),
    LinReg(BayesLinRegTarget),
    Mlp(MlpClassifier),
}

impl BuiltTarget {
    pub fn as_target(&self) -> &dyn atmc_core::Target {
        match self {
            BuiltTarget::Gaussian(t) => t,
            BuiltTarget::LinReg(t) => t,
            BuiltTarget::Mlp(t) => t,
        }
    }

    pub fn as_classifier(&self) -> Option<&MlpClassifier> {
        match self {
            BuiltTarget::Mlp(t) => Some(t),
            _ => None,
        }
    }
}

fn parse_collect(raw: &RawConfig) -> Result<Collect, CliError> {
    let key = "sampler.collect";
    match raw.raw(key) {
        None | Some("never") => Ok(Collect::Never),
        Some("cycle_end") => Ok(Collect::CycleEnd),
        Some(v) => match v.strip_prefix("every:").map(str::parse::<u64>) {
            Some(Ok(k)) if k > 0 => Ok(Collect::EveryK { k }),
            _ => Err(field_error(key, format!("expected never, cycle_end or every:<k>, got {v:?}"))),
        },
    }
}

fn parse_data(raw: &RawConfig, prefix: &str, base: &Path, default_seed: u64) -> Result<Option<DataSource>, CliError> {
    let path_key = format!("{prefix}.dataset");
    let synth_key = format!("{prefix}.synthetic");
    let n_key = format!("{prefix}.n");
    let jitter_key = format!("{prefix}.jitter");
    let seed_key = format!("{prefix}.data_seed");
    match (raw.raw(&path_key), raw.raw(&synth_key)) {
        (Some(_), Some(_)) => Err(field_error(&path_key, format!("conflicts with {synth_key}"))),
        (Some(p), None) => {
            let path = base.join(p);
            if !path.is_file() {
                return Err(field_error(&path_key, format!("file {} does not exist", path.display())));
            }
            Ok(Some(DataSource::File(path)))
        }
        (None, Some("two_moons")) => Ok(Some(DataSource::TwoMoons {
            n: raw.require(&n_key)?,
            jitter: raw.get_or(&jitter_key, 0.1)?,
            seed: raw.get_or(&seed_key, default_seed)?,
        })),
        (None, Some(other)) => Err(field_error(&synth_key, format!("unknown generator {other:?} (expected two_moons)"))),
        (None, None) => Ok(None),
    }
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative dataset paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = RawConfig::load(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_raw(raw, &base)
    }

    pub fn from_raw(raw: RawConfig, base: &Path) -> Result<Self, CliError> {
        let seed: u64 = raw.get_or("seed", 0)?;

        let kind: String = raw.require("target.kind")?;
        let target = match kind.as_str() {
            "gaussian" => {
                let dim: usize = raw.get_or("target.dim", 1)?;
                let broadcast = |key: &str, default: f64| -> Result<Vec<f64>, CliError> {
                    match raw.list(key)? {
                        None => Ok(vec![default; dim]),
                        Some(v) if v.len() == 1 => Ok(vec![v[0]; dim]),
                        Some(v) if v.len() == dim => Ok(v),
                        Some(v) => Err(field_error(key, format!("has {} values, target.dim is {dim}", v.len()))),
                    }
                };
                let mean = broadcast("target.mean", 0.0)?;
                let var = broadcast("target.var", 1.0)?;
                GaussianTarget::new(mean.clone(), var.clone()).map_err(|e| field_error("target", e))?;
                TargetSpec::Gaussian { mean, var }
            }
            "linreg" => TargetSpec::LinReg {
                n: raw.require("target.n")?,
                dim: raw.require("target.dim")?,
                noise_var: raw.positive("target.noise_var", Some(1.0))?,
                prior_var: raw.positive("target.prior_var", Some(1.0))?,
                data_seed: raw.get_or("target.data_seed", 0)?,
            },
            "mlp" => {
                let train = parse_data(&raw, "target", base, 0)?
                    .ok_or_else(|| field_error("target.dataset", "required (or set target.synthetic)"))?;
                let defaults = PriorConfig::default();
                TargetSpec::Mlp {
                    width: raw.require("target.width")?,
                    blocks: raw.get_or("target.blocks", 1)?,
                    classes: raw.get("target.classes")?,
                    kappa: raw.get_or("target.kappa", 0.1)?,
                    prior: PriorConfig {
                        laplace_scale: raw.positive("target.laplace_scale", Some(defaults.laplace_scale))?,
                        direction_strength: raw.get("target.direction_strength")?,
                        bias_var: raw.positive("target.bias_var", Some(defaults.bias_var))?,
                    },
                    train,
                }
            }
            other => return Err(field_error("target.kind", format!("unknown target {other:?} (expected gaussian, linreg or mlp)"))),
        };

        let method: Method = raw
            .require::<String>("sampler.method")?
            .parse()
            .map_err(|e| field_error("sampler.method", e))?;
        let h0 = raw.positive("sampler.h0", None)?;
        let derived = if raw.get_or("sampler.derive", false)? {
            Some(derive_hypers(h0).map_err(|e| field_error("sampler.h0", e))?)
        } else {
            None
        };
        let mass = raw.positive("sampler.mass", Some(derived.map_or(1.0, |d| d.mass)))?;
        let noise_d: f64 = raw.get_or("sampler.noise", derived.map_or(1.0, |d| d.noise))?;
        let kinetics = match raw.raw("sampler.kinetics").unwrap_or("gaussian") {
            "gaussian" => KineticsSpec::gaussian(mass),
            "hyperbolic" => {
                let speed = match derived {
                    Some(d) => raw.positive("sampler.speed", Some(d.speed))?,
                    None => raw.positive("sampler.speed", None)?,
                };
                KineticsSpec::hyperbolic(mass, speed)
            }
            other => return Err(field_error("sampler.kinetics", format!("expected gaussian or hyperbolic, got {other:?}"))),
        }
        .map_err(|e| field_error("sampler.kinetics", e))?;
        let schedule = match raw.raw("sampler.schedule").unwrap_or("constant") {
            "constant" => StepSizeSchedule::Constant { h0 },
            "cyclic" => StepSizeSchedule::Cyclic {
                h0,
                cycle: raw.require("sampler.cycle")?,
            },
            other => return Err(field_error("sampler.schedule", format!("expected constant or cyclic, got {other:?}"))),
        };
        let total_steps: u64 = raw.require("sampler.total_steps")?;
        let mut sampler = SamplerConfig::new(method, kinetics, schedule, noise_d, total_steps, seed);
        sampler.burn_in_steps = raw.get_or("sampler.burn_in", sampler.burn_in_steps)?;
        sampler.collect = parse_collect(&raw)?;
        sampler.batch_size = raw.get("sampler.batch_size")?;
        sampler.xi0 = raw.get("sampler.xi0")?;
        sampler.log_every = raw.get_or("sampler.log_every", 0)?;
        sampler.validate().map_err(|e| field_error("sampler", e))?;

        let noise = match raw.raw("noise.kind").unwrap_or("none") {
            "none" => NoiseSpec::None,
            "gaussian" => match (raw.get::<f64>("noise.sigma")?, raw.get::<f64>("noise.b")?) {
                (Some(s), None) if s >= 0.0 => NoiseSpec::Sigma(s),
                (None, Some(b)) if b >= 0.0 => NoiseSpec::ImpliedB(b),
                (Some(_), Some(_)) => return Err(field_error("noise.sigma", "conflicts with noise.b")),
                (None, None) => return Err(field_error("noise.sigma", "required (or set noise.b)")),
                _ => return Err(field_error("noise", "must be non-negative")),
            },
            other => return Err(field_error("noise.kind", format!("expected none or gaussian, got {other:?}"))),
        };

        let eval = EvalSpec {
            test: parse_data(&raw, "eval", base, 1)?,
            binning: match raw.raw("eval.binning").unwrap_or("equal_count") {
                "equal_count" => Binning::EqualCount,
                "equal_width" => Binning::EqualWidth,
                other => return Err(field_error("eval.binning", format!("expected equal_count or equal_width, got {other:?}"))),
            },
            individual: raw.get_or("eval.individual", false)?,
        };
        let output_dir = raw.raw("output.dir").map(|p| base.join(p));
        raw.reject_unknown()?;

        Ok(Self {
            target,
            sampler,
            noise,
            eval,
            output_dir,
            seed,
            raw,
            base_dir: base.to_path_buf(),
        })
    }

    /// Canonical config text with dataset paths made absolute, so it can be
    /// reloaded from any directory.
    pub fn portable_text(&self) -> Result<String, CliError> {
        let mut raw = self.raw.clone();
        for (key, value) in &self.raw.entries {
            if key.ends_with(".dataset") || key == "output.dir" {
                let path = self.base_dir.join(value);
                let abs = if key == "output.dir" { std::path::absolute(&path) } else { path.canonicalize() };
                let abs = abs.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                raw.set(key, abs.display().to_string());
            }
        }
        Ok(raw.canonical())
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sampler.seed = seed;
        self.raw.set("seed", seed.to_string());
        self
    }

    /// Hash of everything that determines the chain apart from the seed.
    pub fn config_hash(&self) -> Result<String, CliError> {
        let mut extra = self.target_fingerprint()?;
        if let Some(test) = &self.eval.test {
            extra.extend(test.fingerprint()?);
        }
        Ok(self.raw.digest(hashed, &extra))
    }

    /// Hash of the target section and its training data.
    pub fn target_hash(&self) -> Result<String, CliError> {
        let extra = self.target_fingerprint()?;
        Ok(self.raw.digest(|k| k.starts_with("target.") && hashed(k), &extra))
    }

    fn target_fingerprint(&self) -> Result<Vec<u8>, CliError> {
        match &self.target {
            TargetSpec::Mlp { train, .. } => train.fingerprint(),
            _ => Ok(Vec::new()),
        }
    }

    pub fn build_target(&self) -> Result<BuiltTarget, CliError> {
        Ok(match &self.target {
            TargetSpec::Gaussian { mean, var } => BuiltTarget::Gaussian(GaussianTarget::new(mean.clone(), var.clone())?),
            TargetSpec::LinReg {
                n,
                dim,
                noise_var,
                prior_var,
                data_seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*data_seed);
                BuiltTarget::LinReg(BayesLinRegTarget::synthetic(*n, *dim, *noise_var, *prior_var, &mut rng)?)
            }
            TargetSpec::Mlp {
                width,
                blocks,
                classes,
                kappa,
                prior,
                train,
            } => {
                let data = train.load(None)?;
                let classes = classes.unwrap_or(data.num_classes().max(2));
                let config = MlpConfig {
                    input_dim: data.dim(),
                    width: *width,
                    blocks: *blocks,
                    classes,
                    kappa: *kappa,
                    prior: *prior,
                };
                BuiltTarget::Mlp(MlpClassifier::new(config, data).map_err(|e| field_error("target", e))?)
            }
        })
    }

    pub fn noise_model(&self, dim: usize) -> Result<NoiseModel, CliError> {
        let h0 = self.sampler.schedule.base();
        Ok(match self.noise {
            NoiseSpec::None => NoiseModel::None,
            NoiseSpec::Sigma(s) => NoiseModel::gaussian(vec![s; dim])?,
            NoiseSpec::ImpliedB(b) => NoiseModel::from_b(b, h0, dim)?,
        })
    }
}
