//! On-disk chain artifacts.
//!
//! A run directory holds `chain.jsonl` (one diagnostic object per line) and
//! `snapshots/`, where each parameter snapshot is a flat little-endian `f64`
//! array `step_<n>.bin` next to a JSON manifest `step_<n>.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SampleRecord;

pub const CHAIN_FILE: &str = "chain.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// The fixed per-line schema of `chain.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLine {
    pub step: u64,
    pub h: f64,
    pub loss: f64,
    pub kinetic: f64,
    pub xi_mean_abs: f64,
    pub beta_mean: f64,
    pub collected: bool,
}

impl From<&SampleRecord> for ChainLine {
    fn from(r: &SampleRecord) -> Self {
        Self {
            step: r.step,
            h: r.h,
            loss: r.loss,
            kinetic: r.kinetic,
            xi_mean_abs: r.xi_mean_abs,
            beta_mean: r.beta_mean,
            collected: r.collected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub dim: usize,
    pub step: u64,
    pub seed: u64,
    pub config_hash: String,
    /// Hash of the target section of the config alone.
    pub target_hash: String,
    pub method: String,
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
            .collect(),
    )
}

fn snapshot_stem(step: u64) -> String {
    format!("step_{step:010}")
}

pub fn write_snapshot(dir: &Path, manifest: &SnapshotManifest, theta: &[f64]) -> Result<PathBuf> {
    if theta.len() != manifest.dim {
        return Err(Error::Config(format!(
            "snapshot has {} values, manifest says {}",
            theta.len(),
            manifest.dim
        )));
    }
    let bin = dir.join(format!("{}.bin", snapshot_stem(manifest.step)));
    fs::write(&bin, encode_f64s(theta)).map_err(|e| Error::io(&bin, e))?;
    let meta = bin.with_extension("json");
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&meta, json + "\n").map_err(|e| Error::io(&meta, e))?;
    Ok(bin)
}

/// Reads a snapshot given the path of either its `.bin` or `.json` file.
pub fn read_snapshot(path: &Path) -> Result<(SnapshotManifest, Vec<f64>)> {
    let bin = path.with_extension("bin");
    let meta = path.with_extension("json");
    let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let manifest: SnapshotManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: meta.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let theta = decode_f64s(&bytes)
        .filter(|t| t.len() == manifest.dim)
        .ok_or_else(|| Error::Parse {
            path: bin.clone(),
            line: 0,
            message: format!("expected {} little-endian f64 values, found {} bytes", manifest.dim, bytes.len()),
        })?;
    Ok((manifest, theta))
}

/// All snapshots in `dir`, ordered by step.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_snapshot = path.extension().is_some_and(|e| e == "bin")
            && path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("step_"));
        if is_snapshot {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn read_chain(path: &Path) -> Result<Vec<ChainLine>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Identity stamped into every snapshot manifest of a run.
#[derive(Debug, Clone)]
pub struct RunIdentity {
    pub seed: u64,
    pub config_hash: String,
    pub target_hash: String,
    pub method: String,
}

/// Single consumer that writes records in order on a background thread.
/// The bounded channel applies back-pressure to the producing chain.
pub struct RunWriter {
    sender: Option<SyncSender<SampleRecord>>,
    handle: Option<JoinHandle<Result<usize>>>,
}

impl RunWriter {
    pub fn create(outdir: &Path, identity: RunIdentity) -> Result<Self> {
        let snapshots = outdir.join(SNAPSHOT_DIR);
        fs::create_dir_all(&snapshots).map_err(|e| Error::io(&snapshots, e))?;
        let chain_path = outdir.join(CHAIN_FILE);
        let file = File::create(&chain_path).map_err(|e| Error::io(&chain_path, e))?;
        let (sender, receiver) = sync_channel::<SampleRecord>(64);
        let handle = std::thread::spawn(move || -> Result<usize> {
            let mut out = BufWriter::new(file);
            let mut written = 0;
            for record in receiver {
                let line = serde_json::to_string(&ChainLine::from(&record)).expect("record serializes");
                writeln!(out, "{line}").map_err(|e| Error::io(&chain_path, e))?;
                if let Some(theta) = &record.theta {
                    let manifest = SnapshotManifest {
                        dim: theta.len(),
                        step: record.step,
                        seed: identity.seed,
                        config_hash: identity.config_hash.clone(),
                        target_hash: identity.target_hash.clone(),
                        method: identity.method.clone(),
                    };
                    write_snapshot(&snapshots, &manifest, theta)?;
                    written += 1;
                }
            }
            out.flush().map_err(|e| Error::io(&chain_path, e))?;
            Ok(written)
        });
        Ok(Self {
            sender: Some(sender),
            handle: Some(handle),
        })
    }

    pub fn send(&self, record: &SampleRecord) -> Result<()> {
        let sender = self.sender.as_ref().expect("writer is open");
        if sender.send(record.clone()).is_err() {
            // The consumer hung up, which only happens after a write error.
            return Err(Error::Numerical("record writer stopped early".into()));
        }
        Ok(())
    }

    /// Closes the channel and waits for the writer; returns the number of snapshots written.
    pub fn finish(mut self) -> Result<usize> {
        self.close()
    }

    fn close(&mut self) -> Result<usize> {
        drop(self.sender.take());
        match self.handle.take() {
            Some(h) => h.join().unwrap_or_else(|_| Err(Error::Numerical("record writer panicked".into()))),
            None => Ok(0),
        }
    }
}

impl Drop for RunWriter {
    fn drop(&mut self) {
        let _ = self.close();
    }
}
