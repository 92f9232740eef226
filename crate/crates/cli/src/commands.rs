use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use atmc_core::posterior::{self, Binning, CalibrationReport};
use atmc_core::sampler::persist::{self, RunIdentity, RunWriter, CHAIN_FILE, SNAPSHOT_DIR};
use atmc_core::sampler::run_chain_with;
use atmc_core::{derive_hypers, Classifier, Dataset, StepSizeSchedule};
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, ExperimentConfig};
use crate::error::CliError;

pub const RUN_FILE: &str = "run.json";
pub const CONFIG_FILE: &str = "config.txt";
pub const EVAL_FILE: &str = "evaluation.txt";
pub const CALIBRATION_FILE: &str = "calibration.csv";

const ARTIFACTS: [&str; 5] = [CHAIN_FILE, RUN_FILE, CONFIG_FILE, EVAL_FILE, CALIBRATION_FILE];

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Run summary written to `run.json` and echoed on standard output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub target_hash: String,
    pub total_steps: u64,
    pub steps_completed: u64,
    pub snapshots: usize,
    pub final_kinetic: f64,
    pub final_xi_mean_abs: f64,
    pub beta_min: Option<f64>,
    pub abort: Option<String>,
}

fn prepare_outdir(outdir: &Path, force: bool) -> Result<(), CliError> {
    if outdir.exists() {
        let occupied = ARTIFACTS.iter().any(|f| outdir.join(f).exists()) || outdir.join(SNAPSHOT_DIR).exists();
        if occupied && !force {
            return Err(CliError::Config(format!(
                "output directory {} already holds a run; pass --force to overwrite",
                outdir.display()
            )));
        }
        for f in ARTIFACTS {
            let p = outdir.join(f);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| io_err(&p, e))?;
            }
        }
        let snaps = outdir.join(SNAPSHOT_DIR);
        if snaps.exists() {
            fs::remove_dir_all(&snaps).map_err(|e| io_err(&snaps, e))?;
        }
    }
    fs::create_dir_all(outdir).map_err(|e| io_err(outdir, e))
}

/// Runs the configured chain into `outdir`.
pub fn sample(config: &ExperimentConfig, outdir: &Path, force: bool, out: &mut dyn Write) -> Result<RunSummary, CliError> {
    let built = config.build_target()?;
    let target = built.as_target();
    let noise = config.noise_model(target.dim())?;
    let config_hash = config.config_hash()?;
    let target_hash = config.target_hash()?;

    prepare_outdir(outdir, force)?;
    let config_path = outdir.join(CONFIG_FILE);
    fs::write(&config_path, config.portable_text()?).map_err(|e| io_err(&config_path, e))?;

    let method = config.sampler.method.label().to_string();
    let writer = RunWriter::create(
        outdir,
        RunIdentity {
            seed: config.seed,
            config_hash: config_hash.clone(),
            target_hash: target_hash.clone(),
            method: method.clone(),
        },
    )?;
    let run = run_chain_with(&config.sampler, target, &noise, |r| writer.send(r));
    let written = writer.finish();
    let run = run?;
    let snapshots = written?;

    let steps_completed = match &run.abort {
        Some(atmc_core::Error::InvalidState { step: Some(s), .. }) => *s,
        Some(_) => run.records.last().map_or(0, |r| r.step + 1),
        None => config.sampler.total_steps,
    };
    let d = run.final_state.dim().max(1) as f64;
    let final_kinetic = if config.sampler.method == atmc_core::Method::Sgld {
        0.0
    } else {
        config.sampler.kinetics.kinetic_energy(&run.final_state.p).unwrap_or(f64::NAN)
    };
    let summary = RunSummary {
        method,
        seed: config.seed,
        config_hash,
        target_hash,
        total_steps: config.sampler.total_steps,
        steps_completed,
        snapshots,
        final_kinetic,
        final_xi_mean_abs: run.final_state.xi.iter().map(|x| x.abs()).sum::<f64>() / d,
        beta_min: run.beta_min.is_finite().then_some(run.beta_min),
        abort: run.abort.as_ref().map(ToString::to_string),
    };
    let run_path = outdir.join(RUN_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&run_path, json + "\n").map_err(|e| io_err(&run_path, e))?;

    writeln!(out, "method          {}", summary.method)?;
    writeln!(out, "seed            {}", summary.seed)?;
    writeln!(out, "config hash     {}", summary.config_hash)?;
    writeln!(out, "steps           {} / {}", summary.steps_completed, summary.total_steps)?;
    writeln!(out, "snapshots       {}", summary.snapshots)?;
    writeln!(out, "final kinetic   {}", summary.final_kinetic)?;
    writeln!(out, "final |xi| mean {}", summary.final_xi_mean_abs)?;
    match summary.beta_min {
        Some(b) => writeln!(out, "min friction    {b}")?,
        None => writeln!(out, "min friction    n/a")?,
    }
    if let Some(e) = run.abort {
        writeln!(out, "aborted         {e}")?;
        return Err(CliError::from(e));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub label: String,
    pub accuracy: f64,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTable {
    pub header: String,
    pub rows: Vec<EvalRow>,
    /// Mean over members of the single-sample NLL.
    pub mean_member_nll: f64,
    pub calibration: CalibrationReport,
}

impl EvaluationTable {
    pub fn render(&self) -> String {
        let mut s = format!("{}\n{:<40} {:>15} {:>12}\n", self.header, "Estimator", "Top 1 acc. [%]", "NLL [Nats]");
        for r in &self.rows {
            s += &format!("{:<40} {:>15.2} {:>12.4}\n", r.label, 100.0 * r.accuracy, r.nll);
        }
        s += &format!("mean single-sample NLL {:.4}\n", self.mean_member_nll);
        s
    }
}

/// Predictions of every member, computed on scoped worker threads.
fn member_predictions(model: &dyn Classifier, members: &[Vec<f64>], data: &Dataset) -> Result<Vec<Vec<Vec<f64>>>, CliError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(members.len().max(1));
    let chunk = members.len().div_ceil(workers).max(1);
    let parts = std::thread::scope(|scope| {
        let handles: Vec<_> = members
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|theta| posterior::member_predictions(model, theta, data))
                        .collect::<atmc_core::Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect::<Vec<_>>()
    });
    let mut all = Vec::with_capacity(members.len());
    for part in parts {
        all.extend(part?);
    }
    Ok(all)
}

/// Evaluates the snapshots of the run in `rundir` on the configured test set.
pub fn evaluate(rundir: &Path, config: Option<ExperimentConfig>, dataset: Option<PathBuf>, out: &mut dyn Write) -> Result<EvaluationTable, CliError> {
    let config = match config {
        Some(c) => c,
        None => ExperimentConfig::load(&rundir.join(CONFIG_FILE))?,
    };
    let snapdir = rundir.join(SNAPSHOT_DIR);
    let paths = if snapdir.is_dir() { persist::list_snapshots(&snapdir)? } else { Vec::new() };
    if paths.is_empty() {
        return Err(CliError::Config(format!("no snapshots found in {}", snapdir.display())));
    }
    let target_hash = config.target_hash()?;
    let mut members = Vec::with_capacity(paths.len());
    let mut method = None;
    let mut seed = None;
    for path in &paths {
        let (manifest, theta) = persist::read_snapshot(path)?;
        if manifest.target_hash != target_hash {
            return Err(CliError::Config(format!(
                "snapshot {} was produced for a different target (hash {} vs {})",
                path.display(),
                manifest.target_hash,
                target_hash
            )));
        }
        if method.get_or_insert_with(|| manifest.method.clone()) != &manifest.method {
            return Err(CliError::Config("snapshots mix sampler methods".into()));
        }
        seed.get_or_insert(manifest.seed);
        members.push((manifest.step, theta));
    }
    let method = method.unwrap_or_default();

    let built = config.build_target()?;
    let model = built
        .as_classifier()
        .ok_or_else(|| CliError::Config("target.kind: evaluate needs a classifier target (mlp)".into()))?;
    let source = match dataset {
        Some(p) => DataSource::File(p),
        None => config
            .eval
            .test
            .clone()
            .ok_or_else(|| CliError::Config("eval.dataset: required for evaluate (or pass --dataset)".into()))?,
    };
    let test = source.load(Some(model.input_dim()))?;
    let labels = test.labels();

    let thetas: Vec<Vec<f64>> = members.iter().map(|(_, t)| t.clone()).collect();
    let preds = member_predictions(model, &thetas, &test)?;
    let mut rows = Vec::new();
    let mut member_nlls = Vec::with_capacity(preds.len());
    for ((step, _), p) in members.iter().zip(&preds) {
        let nll = posterior::nll(p, labels)?.value;
        member_nlls.push(nll);
        if config.eval.individual {
            rows.push(EvalRow {
                label: format!("{method} (sample at step {step})"),
                accuracy: posterior::accuracy(p, labels)?,
                nll,
            });
        }
    }
    let last = preds.last().expect("at least one member");
    rows.push(EvalRow {
        label: format!("{method} (single sample)"),
        accuracy: posterior::accuracy(last, labels)?,
        nll: posterior::nll(last, labels)?.value,
    });
    let ensemble = posterior::average_predictions(&preds)?;
    rows.push(EvalRow {
        label: format!("{method} (Posterior predictive)"),
        accuracy: posterior::accuracy(&ensemble.probs, labels)?,
        nll: posterior::nll(&ensemble.probs, labels)?.value,
    });
    let calibration = posterior::calibration(&ensemble.probs, labels, config.eval.binning)?;
    let header = format!(
        "# config {} seed {} members {} test examples {}",
        config.config_hash()?,
        seed.unwrap_or(config.seed),
        members.len(),
        test.len()
    );
    let table = EvaluationTable {
        header,
        rows,
        mean_member_nll: member_nlls.iter().sum::<f64>() / member_nlls.len() as f64,
        calibration,
    };

    let text = table.render();
    let eval_path = rundir.join(EVAL_FILE);
    fs::write(&eval_path, &text).map_err(|e| io_err(&eval_path, e))?;
    let cal_path = rundir.join(CALIBRATION_FILE);
    let csv = format!("{}\n{}", table.header, table.calibration.to_csv());
    fs::write(&cal_path, csv).map_err(|e| io_err(&cal_path, e))?;
    out.write_all(text.as_bytes())?;
    Ok(table)
}

/// Calibration of a predictions file whose rows are class probabilities
/// followed by the true label.
pub fn calibrate(predictions: &Path, binning: Binning, outdir: Option<&Path>, out: &mut dyn Write) -> Result<CalibrationReport, CliError> {
    let data = Dataset::load(predictions, None)?;
    let probs: Vec<Vec<f64>> = data.inputs().map(<[f64]>::to_vec).collect();
    let report = posterior::calibration(&probs, data.labels(), binning)?;
    let csv = report.to_csv();
    if let Some(dir) = outdir {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(CALIBRATION_FILE);
        fs::write(&path, &csv).map_err(|e| io_err(&path, e))?;
    }
    out.write_all(csv.as_bytes())?;
    Ok(report)
}

pub fn derive_hypers_cmd(h0: f64, out: &mut dyn Write) -> Result<atmc_core::DerivedHypers, CliError> {
    let d = derive_hypers(h0).map_err(|e| CliError::Config(format!("h0: {e}")))?;
    writeln!(out, "h0 = {}", d.h0)?;
    writeln!(out, "m = {}", d.mass)?;
    writeln!(out, "c = {}", d.speed)?;
    writeln!(out, "D = {}", d.noise)?;
    writeln!(out, "retention = {}", d.retention)?;
    Ok(d)
}

/// Prints `step h` for steps in `start..end`.
pub fn schedule_dump(schedule: &StepSizeSchedule, start: u64, end: u64, out: &mut dyn Write) -> Result<(), CliError> {
    schedule.validate().map_err(|e| CliError::Config(format!("schedule: {e}")))?;
    if end < start {
        return Err(CliError::Config(format!("end: must not be below start ({end} < {start})")));
    }
    for s in start..end {
        writeln!(out, "{s}\t{}", schedule.step_size(s))?;
    }
    Ok(())
}
