use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nsw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsw"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn column(path: &Path, idx: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes `n` synthetic series of `bars` bars into `dir/data`.
fn synth(dir: &Path, bars: usize, n: usize) -> Vec<PathBuf> {
    let out = nsw(
        dir,
        &["synth", "--out", "data", "--set", &format!("synth.bars={bars}"), "--set", &format!("synth.instruments={n}")],
    );
    ok(&out);
    (1..=n).map(|i| dir.join("data").join(format!("SYN{i}.csv"))).collect()
}

#[test]
fn synth_is_deterministic_and_sized() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(tmp.path(), 700, 2);
    let first = std::fs::read(&files[0]).unwrap();
    assert_eq!(column(&files[0], 1).len(), 700);
    synth(tmp.path(), 700, 2);
    assert_eq!(std::fs::read(&files[0]).unwrap(), first);
    assert_ne!(std::fs::read(&files[1]).unwrap(), first);
    let manifest = json(&tmp.path().join("data/manifest.json"));
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["config"]["synth"]["bars"], 700);
}

#[test]
fn synth_matches_ou_variance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsw(
        tmp.path(),
        &[
            "synth", "--out", "ou", "--set", "synth.bars=40000", "--set", "synth.kappa=0.1", "--set", "synth.sigma=0.01",
            "--set", "synth.eta=0",
        ],
    );
    ok(&out);
    let logs: Vec<f64> = column(&tmp.path().join("ou/SYN1.csv"), 1).iter().map(|p| (p / 100.0).ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    // Euler–Maruyama OU: σ² / (2κ - κ²).
    let want = 0.01f64.powi(2) / (2.0 * 0.1 - 0.01);
    assert!((var / want - 1.0).abs() < 0.15, "{var} vs {want}");
    assert!(mean.abs() < 0.01);
}

#[test]
fn backtest_writes_report_and_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(tmp.path(), 1500, 1);
    let out = nsw(tmp.path(), &["backtest", files[0].to_str().unwrap(), "--out", "bt"]);
    ok(&out);
    let dir = tmp.path().join("bt");
    let report = json(&dir.join("report.json"));
    assert_eq!(report["strategy"], "NSW");
    assert_eq!(report["instrument"], "SYN1");
    assert!(report["final_z"].as_f64().unwrap() > 0.0);
    assert!(report["decision_fraction"].as_f64().is_some());
    assert_eq!(report["config"]["levels"], 2);
    assert_eq!(column(&dir.join("equity.csv"), 1).len(), 1500);
    assert!(dir.join("signals.csv").exists() && dir.join("trades.csv").exists());
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["config"]["t0"], 64);
    assert_eq!(manifest["config"]["theta"], 0.25);
}

#[test]
fn constant_series_never_trades() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("timestamp,price\n");
    for i in 0..400 {
        csv.push_str(&format!("{},{}\n", i * 60, 25.0));
    }
    std::fs::write(tmp.path().join("flat.csv"), csv).unwrap();
    ok(&nsw(tmp.path(), &["backtest", "flat.csv", "--out", "flat"]));
    let report = json(&tmp.path().join("flat/report.json"));
    assert_eq!(report["final_z"], 1.0);
    assert_eq!(report["trades"], 0);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(nsw(tmp.path(), &["backtest", "missing.csv"]).status.code(), Some(2));
    assert_eq!(nsw(tmp.path(), &["--set", "no_such_key=1", "synth"]).status.code(), Some(2));
    assert_eq!(nsw(tmp.path(), &["--set", "theta=3", "synth"]).status.code(), Some(2));
    assert_eq!(nsw(tmp.path(), &["--config", "nope.toml", "synth"]).status.code(), Some(2));
    assert_eq!(nsw(tmp.path(), &["bogus"]).status.code(), Some(2));
    std::fs::write(tmp.path().join("run.toml"), "theta = \n").unwrap();
    assert_eq!(nsw(tmp.path(), &["--config", "run.toml", "synth"]).status.code(), Some(2));
}

#[test]
fn config_file_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.toml"), "seed = 5\n[synth]\nbars = 321\n").unwrap();
    ok(&nsw(tmp.path(), &["--config", "run.toml", "synth", "--out", "d"]));
    assert_eq!(column(&tmp.path().join("d/SYN1.csv"), 1).len(), 321);
    assert_eq!(json(&tmp.path().join("d/manifest.json"))["config"]["seed"], 5);
}

#[test]
fn single_instrument_parcel_reduces_to_backtest() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(tmp.path(), 1200, 1);
    let data = files[0].to_str().unwrap();
    ok(&nsw(tmp.path(), &["backtest", data, "--out", "bt"]));
    // Without a re-optimization the single weight stays at 1.
    ok(&nsw(tmp.path(), &["parcel", data, "--out", "pc", "--set", "theta=1e-9", "--set", "t1=5000"]));
    let single = column(&tmp.path().join("bt/equity.csv"), 1);
    let parcel = column(&tmp.path().join("pc/parcel_equity.csv"), 1);
    assert_eq!(single.len(), parcel.len());
    for (a, b) in single.iter().zip(&parcel) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn three_instrument_parcel_starts_equal() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(tmp.path(), 1200, 3);
    let args: Vec<&str> = ["parcel"]
        .into_iter()
        .chain(files.iter().map(|f| f.to_str().unwrap()))
        .chain(["--out", "pc"])
        .collect();
    ok(&nsw(tmp.path(), &args));
    let weights = std::fs::read_to_string(tmp.path().join("pc/weights.csv")).unwrap();
    let mut lines = weights.lines();
    assert_eq!(lines.next().unwrap(), "t,n_1,n_2,n_3,slack,P_theta");
    let first: Vec<f64> = lines.next().unwrap().split(',').skip(1).take(3).map(|v| v.parse().unwrap()).collect();
    for w in first {
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }
    for line in lines {
        let v: Vec<f64> = line.split(',').skip(1).take(4).map(|v| v.parse().unwrap()).collect();
        assert!(v.iter().all(|x| *x >= 0.0));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let summary = json(&tmp.path().join("pc/parcel.json"));
    assert_eq!(summary["instruments"].as_array().unwrap().len(), 3);
    assert!(tmp.path().join("pc/SYN2/report.json").exists());
}

#[test]
fn misaligned_parcel_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(tmp.path(), 300, 1);
    ok(&nsw(tmp.path(), &["synth", "--out", "late", "--set", "synth.bars=300", "--set", "synth.start=999"]));
    let out = nsw(tmp.path(), &["parcel", files[0].to_str().unwrap(), "late/SYN1.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not aligned"));
}

#[test]
fn compare_builds_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(tmp.path(), 1500, 2);
    let (a, b) = (files[0].to_str().unwrap(), files[1].to_str().unwrap());
    let out = nsw(tmp.path(), &["compare", a, b, "--out", "cmp", "--reference"]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("NSW") && stdout.contains("1.852"));
    let table = std::fs::read_to_string(tmp.path().join("cmp/comparison.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "instrument,PC,BB,MACD,RSI,NSW");
    assert_eq!(table.lines().count(), 3);

    ok(&nsw(tmp.path(), &["compare", a, "--out", "rsi", "--no-nsw", "--baselines", "rsi"]));
    let t = json(&tmp.path().join("rsi/comparison.json"));
    assert_eq!(t["columns"], serde_json::json!(["RSI"]));
    assert_eq!(t["rows"].as_array().unwrap().len(), 1);
}
