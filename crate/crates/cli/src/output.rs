//! Output directory handling, CSV writers and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use critheat::config::{to_json, RunConfig};
use critheat::evolve::Trajectory;
use critheat::functionals::TOL_THRESHOLD;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An output directory that records every file written into it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl OutputDir {
    /// Creates `root`; an existing non-empty directory needs `overwrite`, which
    /// removes the files listed by its previous manifest.
    pub fn open(root: &Path, overwrite: bool) -> Result<Self, CliError> {
        if root.exists() {
            if !root.is_dir() {
                return Err(io_error(root, std::io::Error::other("exists and is not a directory")));
            }
            let non_empty = fs::read_dir(root).map_err(|e| io_error(root, e))?.next().is_some();
            if non_empty {
                if !overwrite {
                    return Err(CliError::OutputExists(root.to_path_buf()));
                }
                remove_previous(root)?;
            }
        }
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn claim(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Writes a CSV with the given header and rows.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.claim(name)?;
        let csv_err = |e: csv::Error| io_error(&path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_error(&path, e))
    }

    pub fn raw(&mut self, name: &str, write: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.claim(name)?;
        let mut f = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        write(&mut f).map_err(|e| io_error(&path, e))
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self, command: &str, cfg: &RunConfig, results: Value) -> Result<(), CliError> {
        let config_text = to_json(cfg);
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = json!({
            "tool": "critheat",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_sha256": sha256_hex(config_text.as_bytes()),
            "config": serde_json::from_str::<Value>(&config_text).expect("config is JSON"),
            "seed": cfg.seed,
            "grid": grid_summary(cfg),
            "tolerances": {
                "solver_tol": cfg.solver.tol,
                "dt_min": cfg.solver.dt_min,
                "tol_threshold": TOL_THRESHOLD,
                "eps_dissip": cfg.detect.eps_dissip,
                "tol_pos": cfg.detect.tol_pos,
                "tol_diag": cfg.splitting.tol_diag,
            },
            "outputs": self.written,
            "results": results,
            "created_unix": created,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
    }
}

fn remove_previous(root: &Path) -> Result<(), CliError> {
    let manifest = root.join(MANIFEST);
    let Ok(text) = fs::read_to_string(&manifest) else {
        return Ok(());
    };
    if let Ok(v) = serde_json::from_str::<Value>(&text) {
        for name in v["outputs"].as_array().into_iter().flatten().filter_map(Value::as_str) {
            let p = root.join(name);
            if p.is_file() {
                fs::remove_file(&p).map_err(|e| io_error(&p, e))?;
            }
        }
    }
    fs::remove_file(&manifest).map_err(|e| io_error(&manifest, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn grid_summary(cfg: &RunConfig) -> Value {
    json!({
        "dimension": cfg.dimension,
        "radius": cfg.grid.radius,
        "n": cfg.grid.n,
        "stretch": cfg.grid.stretch,
    })
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Long-form rows `(t, quantity, value)` for every snapshot.
pub fn trajectory_rows(traj: &Trajectory) -> Vec<[String; 3]> {
    let mut rows = Vec::new();
    for s in &traj.snapshots {
        let t = num(s.t());
        let r = &s.report;
        let mut push = |q: &str, v: f64| rows.push([t.clone(), q.to_string(), num(v)]);
        push("h1_sq", r.h1_sq);
        push("l2star_pow", r.l2star_pow);
        push("energy", r.energy);
        push("nehari", r.nehari);
        if let Some(l2) = r.l2_sq {
            push("l2_sq", l2);
        }
        if let Some(kq) = s.kq {
            push("kq", kq);
        }
        push("sup", s.sup);
        push("min", s.min);
        push("dissipation", s.dissipation);
    }
    rows
}

pub const LONG_HEADER: [&str; 3] = ["t", "quantity", "value"];

/// Serializes `value` to a JSON tree for the manifest.
pub fn to_value(value: &impl Serialize) -> Value {
    serde_json::to_value(value).expect("result serializes")
}
