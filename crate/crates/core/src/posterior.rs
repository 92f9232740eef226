//! Posterior-predictive ensembles and their evaluation.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::targets::{Classifier, Dataset};

pub const NUM_BINS: usize = 8;
/// Floor applied to the true-class probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Averaged class probabilities of `members` ensemble members, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEnsemble {
    pub members: usize,
    pub probs: Vec<Vec<f64>>,
}

/// Class probabilities of a single parameter vector on every input.
pub fn member_predictions(model: &dyn Classifier, theta: &[f64], data: &Dataset) -> Result<Vec<Vec<f64>>> {
    data.inputs().map(|x| model.predict(theta, x)).collect()
}

/// Arithmetic mean of member predictions. Each cell is summed in sorted
/// order, so the result does not depend on member order.
pub fn average_predictions(members: &[Vec<Vec<f64>>]) -> Result<PredictiveEnsemble> {
    let first = members.first().ok_or(Error::EmptyEnsemble)?;
    let shape: Vec<usize> = first.iter().map(Vec::len).collect();
    for m in members {
        if m.len() != first.len() || m.iter().map(Vec::len).ne(shape.iter().copied()) {
            return Err(Error::Config("ensemble members disagree on prediction shape".into()));
        }
    }
    let s = members.len() as f64;
    let mut cell = Vec::with_capacity(members.len());
    let probs = shape
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            (0..k)
                .map(|c| {
                    cell.clear();
                    cell.extend(members.iter().map(|m| m[i][c]));
                    cell.sort_by(f64::total_cmp);
                    cell.iter().sum::<f64>() / s
                })
                .collect()
        })
        .collect();
    Ok(PredictiveEnsemble {
        members: members.len(),
        probs,
    })
}

pub fn posterior_predictive(members: &[Vec<f64>], model: &dyn Classifier, data: &Dataset) -> Result<PredictiveEnsemble> {
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let preds = members
        .iter()
        .map(|theta| member_predictions(model, theta, data))
        .collect::<Result<Vec<_>>>()?;
    average_predictions(&preds)
}

fn check_labels(probs: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} prediction rows but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some((i, _)) = probs.iter().zip(labels).enumerate().find(|(_, (p, &l))| l >= p.len()) {
        return Err(Error::Config(format!("label {} of example {i} is not a valid class", labels[i])));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nll {
    /// Mean negative log-likelihood in nats.
    pub value: f64,
    /// Examples whose true-class probability was raised to [`PROB_FLOOR`].
    pub clamped: usize,
}

pub fn per_example_nll(probs: &[Vec<f64>], labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(probs, labels)?;
    Ok(probs.iter().zip(labels).map(|(p, &l)| -p[l].max(PROB_FLOOR).ln()).collect())
}

pub fn nll(probs: &[Vec<f64>], labels: &[usize]) -> Result<Nll> {
    let per = per_example_nll(probs, labels)?;
    if per.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let clamped = probs.iter().zip(labels).filter(|(p, &l)| !(p[l] >= PROB_FLOOR)).count();
    Ok(Nll {
        value: per.iter().sum::<f64>() / per.len() as f64,
        clamped,
    })
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    if probs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let hits = probs.iter().zip(labels).filter(|(p, &l)| argmax(p) == l).count();
    Ok(hits as f64 / probs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Binning {
    /// Quantile bins of equal size; earlier bins absorb the remainder.
    #[default]
    EqualCount,
    /// Bins of width 1/8 over the confidence axis.
    EqualWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub count: usize,
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub bins: Vec<CalibrationBin>,
    /// Count-weighted mean of `|confidence - accuracy|` over bins.
    pub ece: f64,
}

impl CalibrationReport {
    /// `bin_index,count,mean_confidence,mean_accuracy` rows and a final `ece` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_index,count,mean_confidence,mean_accuracy\n");
        for (i, b) in self.bins.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", b.count, b.mean_confidence, b.mean_accuracy);
        }
        let _ = writeln!(out, "ece,{}", self.ece);
        out
    }
}

/// Confidence (largest probability) and correctness of each prediction.
pub fn confidences(probs: &[Vec<f64>], labels: &[usize]) -> Result<(Vec<f64>, Vec<bool>)> {
    check_labels(probs, labels)?;
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            let k = argmax(p);
            (p[k], k == l)
        })
        .unzip())
}

pub fn calibration(probs: &[Vec<f64>], labels: &[usize], binning: Binning) -> Result<CalibrationReport> {
    let (conf, correct) = confidences(probs, labels)?;
    calibration_from_confidences(&conf, &correct, binning)
}

pub fn calibration_from_confidences(conf: &[f64], correct: &[bool], binning: Binning) -> Result<CalibrationReport> {
    if conf.len() != correct.len() {
        return Err(Error::Config(format!(
            "{} confidences but {} correctness flags",
            conf.len(),
            correct.len()
        )));
    }
    let n = conf.len();
    if n < NUM_BINS {
        return Err(Error::InsufficientData { needed: NUM_BINS, got: n });
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); NUM_BINS];
    match binning {
        Binning::EqualCount => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| conf[a].total_cmp(&conf[b]).then(a.cmp(&b)));
            let (base, rem) = (n / NUM_BINS, n % NUM_BINS);
            let mut rest = order.as_slice();
            for (k, group) in groups.iter_mut().enumerate() {
                let (head, tail) = rest.split_at(base + usize::from(k < rem));
                group.extend_from_slice(head);
                rest = tail;
            }
        }
        Binning::EqualWidth => {
            for (i, &c) in conf.iter().enumerate() {
                let k = ((c * NUM_BINS as f64).floor().max(0.0) as usize).min(NUM_BINS - 1);
                groups[k].push(i);
            }
        }
    }
    let mut ece = 0.0;
    let bins = groups
        .iter()
        .map(|g| {
            if g.is_empty() {
                return CalibrationBin {
                    count: 0,
                    mean_confidence: 0.0,
                    mean_accuracy: 0.0,
                };
            }
            let size = g.len() as f64;
            let mean_confidence = g.iter().map(|&i| conf[i]).sum::<f64>() / size;
            let mean_accuracy = g.iter().filter(|&&i| correct[i]).count() as f64 / size;
            ece += size / n as f64 * (mean_confidence - mean_accuracy).abs();
            CalibrationBin {
                count: g.len(),
                mean_confidence,
                mean_accuracy,
            }
        })
        .collect();
    Ok(CalibrationReport { bins, ece })
}
