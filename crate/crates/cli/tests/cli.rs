use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_critheat");

const SMALL_GAUSSIAN: &str = r#"{"dimension": 5, "grid": {"radius": 50, "stretch": 1.002},
  "initial": {"family": "gaussian", "amp": 0.2, "width": 1.0}}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn critheat(args: &[&str]) -> i32 {
    let out = Command::new(BIN).args(args).output().unwrap();
    out.status.code().unwrap()
}

#[test]
fn run_writes_manifest_and_long_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_GAUSSIAN);
    let out = tmp.path().join("out");
    assert_eq!(critheat(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--checkpoints"]), 0);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["results"]["verdict"]["kind"], "dissipative");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"trajectory.csv"));
    assert!(outputs.iter().any(|o| o.starts_with("checkpoints/")));
    for o in &outputs {
        assert!(out.join(o).is_file(), "{o}");
    }
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,quantity,value\n"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 3));
}

#[test]
fn identical_inputs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_GAUSSIAN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        assert_eq!(critheat(&["run", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", "7"]), 0);
    }
    for f in ["trajectory.csv", "events.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn existing_output_needs_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_GAUSSIAN);
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(critheat(&["character", "--config", &cfg, "--out", out]), 0);
    assert_eq!(critheat(&["character", "--config", &cfg, "--out", out]), 3);
    assert_eq!(critheat(&["run", "--config", &cfg, "--out", out, "--overwrite"]), 0);
    // the character output was listed by the old manifest and is gone
    assert!(!Path::new(out).join("character.csv").exists());
    assert!(Path::new(out).join("trajectory.csv").exists());
}

#[test]
fn canned_failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d2 = write_config(tmp.path(), "d2.json", r#"{"dimension": 2, "initial": {"family": "aW", "a": 0.9}}"#);
    let out = tmp.path().join("o");
    assert_eq!(critheat(&["run", "--config", &d2, "--out", out.to_str().unwrap()]), 2);

    let ok = write_config(tmp.path(), "ok.json", SMALL_GAUSSIAN);
    let file = tmp.path().join("plain");
    fs::write(&file, "x").unwrap();
    let under = file.join("sub");
    assert_eq!(critheat(&["run", "--config", &ok, "--out", under.to_str().unwrap()]), 3);

    let huge = write_config(
        tmp.path(),
        "huge.json",
        r#"{"dimension": 5, "grid": {"radius": 50, "stretch": 1.002},
            "initial": {"family": "gaussian", "amp": 1e200, "width": 1.0}}"#,
    );
    let out = tmp.path().join("h");
    assert_eq!(critheat(&["run", "--config", &huge, "--out", out.to_str().unwrap()]), 4);

    assert_eq!(critheat(&["run", "--config", tmp.path().join("missing.json").to_str().unwrap(), "--out", "x"]), 3);
    assert_eq!(critheat(&["frobnicate"]), 2);
    let no_out = write_config(tmp.path(), "n.json", SMALL_GAUSSIAN);
    assert_eq!(critheat(&["run", "--config", &no_out]), 2);
}

#[test]
fn character_of_gaussian_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_GAUSSIAN);
    let out = tmp.path().join("out");
    assert_eq!(critheat(&["character", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let mut rdr = csv::Reader::from_path(out.join("character.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let r_star: f64 = rows[0][3].parse().unwrap();
    let shifted: f64 = rows[1][3].parse().unwrap();
    assert!(r_star.abs() < 0.02, "{r_star}");
    assert!((shifted - 1.0).abs() < 0.03, "{shifted}");
    assert_eq!(&rows[0][4], "exists");
}

#[test]
fn sweep_with_violating_row_is_partial() {
    let tmp = tempfile::tempdir().unwrap();
    // amplitude 8 puts the Gaussian above the threshold energy with J > 0
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"dimension": 5, "grid": {"radius": 50, "stretch": 1.002},
            "initial": {"family": "gaussian", "amp": 0.2, "width": 1.0},
            "sweep": {"dimensions": [5], "points": [
                {"family": "gaussian", "amp": 0.2, "width": 1.0},
                {"family": "gaussian", "amp": 8.0, "width": 1.0}]}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(critheat(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "1"]), 6);
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert_eq!(&rows[0][col("hypotheses")], "branch_i");
    assert_eq!(&rows[1][col("hypotheses")], "neither");
    assert!(rows.iter().all(|r| &r[col("consistent_with_theorem")] == "true"));
}
