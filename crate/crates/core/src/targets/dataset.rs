use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Labelled examples, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::Config(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self { features, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    /// One past the largest label.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Parses delimiter-separated rows of features followed by an integer
    /// label. Commas, tabs, semicolons and runs of spaces all separate
    /// fields; blank lines and `#` comments are skipped. When
    /// `expected_features` is given every row must match it.
    pub fn parse(text: &str, expected_features: Option<usize>, origin: &Path) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut width = expected_features;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line
                .split([',', '\t', ';', ' '])
                .filter(|f| !f.is_empty())
                .collect();
            let (label, feats) = fields
                .split_last()
                .ok_or_else(|| parse_err("empty row".into()))?;
            match width {
                Some(w) if w != feats.len() => {
                    return Err(parse_err(format!(
                        "expected {w} feature columns plus a label, found {} columns",
                        fields.len()
                    )))
                }
                None if feats.is_empty() => return Err(parse_err("row has no feature columns".into())),
                None => width = Some(feats.len()),
                _ => {}
            }
            for f in feats {
                let v: f64 = f.parse().map_err(|_| parse_err(format!("invalid feature value {f:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("non-finite feature value {f:?}")));
                }
                features.push(v);
            }
            labels.push(
                label
                    .parse::<usize>()
                    .map_err(|_| parse_err(format!("invalid class label {label:?}")))?,
            );
        }
        let dim = width.ok_or_else(|| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "no examples".into(),
        })?;
        Self::new(features, labels, dim)
    }

    pub fn load(path: &Path, expected_features: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, expected_features, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (row, label) in self.inputs().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }
}

/// Two interleaving half circles with Gaussian jitter, `n` points split as
/// evenly as possible between the classes.
pub fn two_moons<R: Rng + ?Sized>(n: usize, noise: f64, rng: &mut R) -> Dataset {
    let n_outer = n - n / 2;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (label, k, count) = if i < n_outer { (0, i, n_outer) } else { (1, i - n_outer, n / 2) };
        let t = if count > 1 {
            std::f64::consts::PI * k as f64 / (count - 1) as f64
        } else {
            0.0
        };
        let (x, y) = if label == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        features.push(x + noise * rng.sample::<f64, _>(StandardNormal));
        features.push(y + noise * rng.sample::<f64, _>(StandardNormal));
        labels.push(label);
    }
    Dataset { features, labels, dim: 2 }
}
