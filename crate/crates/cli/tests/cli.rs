use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn atmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atmc")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const GAUSS: &str = "\
seed = 1
target.kind = gaussian
target.dim = 3
sampler.method = atmc
sampler.h0 = 0.01
sampler.total_steps = 100
sampler.collect = every:10
sampler.log_every = 5
";

const MOONS: &str = "\
seed = 2
target.kind = mlp
target.synthetic = two_moons
target.n = 60
target.width = 6
target.blocks = 1
sampler.method = atmc
sampler.h0 = 0.002
sampler.mass = 1
sampler.noise = 20
sampler.schedule = cyclic
sampler.cycle = 50
sampler.total_steps = 400
sampler.burn_in = 100
sampler.collect = cycle_end
sampler.batch_size = 20
eval.synthetic = two_moons
eval.n = 40
eval.data_seed = 9
";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gaussian_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.cfg", GAUSS);
    let run = dir.path().join("run");
    let start = Instant::now();
    let out = atmc(&["sample", "--config", s(&cfg), "--outdir", s(&run)]);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("steps           100 / 100"), "{stdout}");

    let lines = fs::read_to_string(run.join("chain.jsonl")).unwrap();
    // Logged every 5 steps (20 lines) plus 9 collections at steps 19, 29, ..., 99.
    assert_eq!(lines.lines().count(), 29);
    let snaps: Vec<_> = fs::read_dir(run.join("snapshots")).unwrap().collect();
    // A .bin and a .json per collection.
    assert_eq!(snaps.len(), 2 * 9);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("snapshots/step_0000000099.json")).unwrap()).unwrap();
    assert_eq!(manifest["dim"], 3);
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    let run_json: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["beta_min"], 1.0);
}

#[test]
fn rerun_is_byte_identical_and_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.cfg", GAUSS);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(atmc(&["sample", "--config", s(&cfg), "--outdir", s(&a)]).status.success());
    assert!(atmc(&["sample", "--config", s(&cfg), "--outdir", s(&b)]).status.success());
    assert_eq!(fs::read(a.join("chain.jsonl")).unwrap(), fs::read(b.join("chain.jsonl")).unwrap());
    assert_eq!(fs::read(a.join("run.json")).unwrap(), fs::read(b.join("run.json")).unwrap());

    let again = atmc(&["sample", "--config", s(&cfg), "--outdir", s(&a)]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let forced = atmc(&["sample", "--config", s(&cfg), "--outdir", s(&a), "--force", "--seed", "5"]);
    assert!(forced.status.success());
    assert_ne!(fs::read(a.join("chain.jsonl")).unwrap(), fs::read(b.join("chain.jsonl")).unwrap());
}

#[test]
fn missing_dataset_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = MOONS.replace("target.synthetic = two_moons\n", "target.dataset = nowhere.csv\n");
    let cfg = write_config(dir.path(), "m.cfg", &body);
    let out = atmc(&["sample", "--config", s(&cfg), "--outdir", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target.dataset"));
}

#[test]
fn evaluate_table_and_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", MOONS);
    let run = dir.path().join("run");
    let out = atmc(&["sample", "--config", s(&cfg), "--outdir", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = atmc(&["evaluate", "--outdir", s(&run)]);
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let text = String::from_utf8_lossy(&eval.stdout).to_string();
    assert!(text.contains("ATMC (single sample)"), "{text}");
    assert!(text.contains("ATMC (Posterior predictive)"));
    let csv = fs::read_to_string(run.join("calibration.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("ece,"));
    assert_eq!(fs::read_to_string(run.join("evaluation.txt")).unwrap(), text);

    // A config for a different target is refused.
    let other = write_config(dir.path(), "o.cfg", &MOONS.replace("target.width = 6", "target.width = 7"));
    let refused = atmc(&["evaluate", "--config", s(&other), "--outdir", s(&run)]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("different target"));
}

#[test]
fn single_snapshot_rows_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let body = MOONS.replace("sampler.total_steps = 400", "sampler.total_steps = 150");
    let cfg = write_config(dir.path(), "m.cfg", &body);
    let run = dir.path().join("run");
    assert!(atmc(&["sample", "--config", s(&cfg), "--outdir", s(&run)]).status.success());
    let eval = atmc(&["evaluate", "--outdir", s(&run)]);
    let text = String::from_utf8_lossy(&eval.stdout).to_string();
    let numbers = |label: &str| -> String {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line[label.len()..].trim().to_string()
    };
    assert!(text.contains("members 1"), "{text}");
    assert_eq!(numbers("ATMC (single sample)"), numbers("ATMC (Posterior predictive)"));
}

#[test]
fn evaluate_without_snapshots_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.cfg", &MOONS.replace("cycle_end", "never"));
    let run = dir.path().join("run");
    assert!(atmc(&["sample", "--config", s(&cfg), "--outdir", s(&run)]).status.success());
    let eval = atmc(&["evaluate", "--outdir", s(&run)]);
    assert_ne!(eval.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&eval.stderr).contains("no snapshots"));
}

#[test]
fn numerical_abort_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = "target.kind = gaussian\ntarget.var = 1e-4\nsampler.method = sghmc\nsampler.noise = 0.001\nsampler.h0 = 1\nsampler.total_steps = 10000\n";
    let cfg = write_config(dir.path(), "d.cfg", body);
    let out = atmc(&["sample", "--config", s(&cfg), "--outdir", s(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("r/run.json").exists());
}

#[test]
fn derive_hypers_prints_conventions() {
    let out = atmc(&["derive-hypers", "--h0", "0.001"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{key} = "))).unwrap();
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert!((value("m") - 11.111).abs() < 1e-3);
    assert!((value("c") - 1.0).abs() < 1e-12);
    assert!((value("D") - 105.361).abs() < 1e-3);
    assert!((value("retention") - 0.9).abs() < 1e-12);
    assert_eq!(atmc(&["derive-hypers", "--h0=0"]).status.code(), Some(1));
}

#[test]
fn schedule_dump_cycle() {
    let out = atmc(&["schedule-dump", "--h0", "0.001", "--cycle", "100", "--start", "0", "--end", "100"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 100);
    assert_eq!(lines[0], "0\t0.001");
    let h50: f64 = lines[50].split('\t').nth(1).unwrap().parse().unwrap();
    assert!((h50 - 0.0005).abs() < 1e-15);
    let h99: f64 = lines[99].split('\t').nth(1).unwrap().parse().unwrap();
    assert!((h99 - 2.467e-7).abs() < 1e-9);
}

#[test]
fn calibrate_predictions_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("# p0,p1,label\n");
    // Bins of 4 consecutive rows, each with one miss: accuracy 0.75 everywhere.
    for i in 0..32 {
        body += &format!("0.75,0.25,{}\n", usize::from(i % 4 == 0));
    }
    let preds = write_config(dir.path(), "preds.csv", &body);
    let out = atmc(&["calibrate", s(&preds), "--outdir", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 10);
    let ece: f64 = text.lines().last().unwrap().trim_start_matches("ece,").parse().unwrap();
    assert!(ece.abs() < 1e-12);
    assert!(dir.path().join("calibration.csv").exists());
    let short = write_config(dir.path(), "short.csv", "0.5,0.5,1\n");
    assert_eq!(atmc(&["calibrate", s(&short)]).status.code(), Some(1));
    assert_eq!(atmc(&["calibrate", "/nonexistent/preds.csv"]).status.code(), Some(3));
}
