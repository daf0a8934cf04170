//! Run configuration: a JSON tree with every default materialized on parse.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evolve::{Cadence, DetectorSettings, SolverSettings, Threshold};
use crate::experiments::SplittingSettings;
use crate::families::{InitialData, REGISTERED_FAMILIES};
use crate::functionals::{classify_set, default_q, SetMembership, TOL_THRESHOLD};
use crate::ground_state::{default_radius, ground_state_energy, default_stretch, nodes_for_spacing, DEFAULT_CORE_SPACING};
use crate::radial::{make_grid, RadialField, RadialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub radius: Option<f64>,
    pub n: Option<usize>,
    pub stretch: Option<f64>,
}

impl GridSpec {
    /// Fills missing entries with the per-dimension defaults.
    pub fn materialize(&mut self, d: usize) {
        let radius = *self.radius.get_or_insert_with(|| default_radius(d));
        let stretch = *self.stretch.get_or_insert_with(|| default_stretch(d));
        self.n.get_or_insert_with(|| nodes_for_spacing(radius, stretch, DEFAULT_CORE_SPACING));
    }

    pub fn build(&self, d: usize) -> Result<Arc<RadialGrid>> {
        let mut full = self.clone();
        full.materialize(d);
        make_grid(d, full.radius.unwrap(), full.n.unwrap(), full.stretch.unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dimensions to sweep; other than `dimension`, each uses its default grid.
    pub dimensions: Vec<usize>,
    pub points: Vec<InitialData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    /// Overrides the default window `[2, (R/8)²]`.
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    #[serde(default)]
    pub grid: GridSpec,
    pub initial: InitialData,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub cadence: Cadence,
    #[serde(default)]
    pub detect: DetectorSettings,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub splitting: SplittingSettings,
}

fn config_error(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn check_family(field: &str, v: Option<&Value>) -> Result<()> {
    let registered = REGISTERED_FAMILIES.join(", ");
    match v.and_then(|x| x.get("family")) {
        Some(Value::String(tag)) if REGISTERED_FAMILIES.contains(&tag.as_str()) => Ok(()),
        Some(Value::String(tag)) => Err(config_error(
            format!("{field}.family"),
            format!("unknown family `{tag}`; registered families: {registered}"),
        )),
        _ => Err(config_error(
            format!("{field}.family"),
            format!("missing family tag; registered families: {registered}"),
        )),
    }
}

fn check_dimension(field: &str, v: Option<&Value>) -> Result<usize> {
    match v.and_then(Value::as_u64) {
        Some(d) if d >= 3 => Ok(d as usize),
        Some(d) => Err(config_error(field, format!("dimension must be >= 3, got {d}"))),
        None => Err(config_error(field, "dimension must be an integer >= 3")),
    }
}

/// Parses and validates a config, filling every default.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let tree: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !tree.is_object() {
        return Err(config_error("<root>", "config must be a JSON object"));
    }
    check_dimension("dimension", tree.get("dimension"))?;
    check_family("initial", tree.get("initial"))?;
    if let Some(points) = tree.get("sweep").and_then(|s| s.get("points")).and_then(Value::as_array) {
        for (i, p) in points.iter().enumerate() {
            check_family(&format!("sweep.points[{i}]"), Some(p))?;
        }
    }
    if let Some(dims) = tree.get("sweep").and_then(|s| s.get("dimensions")).and_then(Value::as_array) {
        for (i, d) in dims.iter().enumerate() {
            check_dimension(&format!("sweep.dimensions[{i}]"), Some(d))?;
        }
    }
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.materialize();
    cfg.validate()?;
    Ok(cfg)
}

/// Pretty JSON that [`parse_config`] maps back to an identical value.
pub fn to_json(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

/// Initial datum and bubble reference for one run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Arc<RadialGrid>,
    pub u0: RadialField,
    pub threshold: Threshold,
    pub set: SetMembership,
}

impl Prepared {
    /// `|E(W) - E(u₀)| ≤ 10·tol·E(W)` or `|J(u₀)| < 10·tol·‖∇u₀‖²`.
    pub fn near_threshold(&self) -> bool {
        let tol = 10.0 * TOL_THRESHOLD;
        let h1 = self.u0.dirichlet_energy();
        (self.threshold.e_of_w - self.set.energy).abs() <= tol * self.threshold.e_of_w.abs()
            || self.set.nehari.abs() < tol * h1
    }
}

impl RunConfig {
    pub fn materialize(&mut self) {
        self.grid.materialize(self.dimension);
        if self.detect.kq_q.is_none() {
            self.detect.kq_q = Some(default_q(self.dimension));
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidArgument { name, reason } => config_error(format!("{section}.{name}"), reason),
                other => other,
            })
        };
        if self.dimension < 3 {
            return Err(config_error("dimension", format!("dimension must be >= 3, got {}", self.dimension)));
        }
        wrap("solver", self.solver.validate())?;
        wrap("detect", self.detect.validate())?;
        wrap("cadence", self.cadence.validate())?;
        wrap("initial", self.initial.validate(self.dimension))?;
        wrap("grid", self.grid.build(self.dimension).map(|_| ()))?;
        wrap("splitting", self.splitting.validate())?;
        if let Some((lo, hi)) = self.fit.window {
            if !(lo > 0.0 && hi > lo) {
                return Err(config_error("fit.window", format!("need 0 < t_lo < t_hi, got [{lo}, {hi}]")));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.dimensions.is_empty() || sw.points.is_empty() {
                return Err(config_error("sweep", "needs at least one dimension and one point"));
            }
            for (i, p) in sw.points.iter().enumerate() {
                for &d in &sw.dimensions {
                    p.validate(d)
                        .map_err(|e| config_error(format!("sweep.points[{i}]"), e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// The same run in dimension `d` with initial datum `initial`.
    pub fn variant(&self, d: usize, initial: InitialData) -> RunConfig {
        let mut c = self.clone();
        c.initial = initial;
        if d != self.dimension {
            c.dimension = d;
            c.grid = GridSpec::default();
            c.detect.kq_q = None;
            c.sweep = None;
            c.materialize();
        }
        c
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>> {
        self.grid.build(self.dimension)
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let grid = self.build_grid()?;
        let e_of_w = ground_state_energy(self.dimension, &grid)?;
        let u0 = self.initial.build(&grid, self.seed, e_of_w)?;
        let set = classify_set(&u0, e_of_w)?;
        Ok(Prepared {
            grid,
            u0,
            threshold: Threshold::from_energy(self.dimension, e_of_w),
            set,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"dimension": 4, "initial": {"family": "aW", "a": 0.9}}"#;

    #[test]
    fn minimal_config_materializes_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.dimension, 4);
        assert_eq!(cfg.grid.radius, Some(1e4));
        assert_eq!(cfg.grid.stretch, Some(default_stretch(4)));
        assert!(cfg.grid.n.unwrap() > 1000);
        assert_eq!(cfg.detect.kq_q, Some(default_q(4)));
        assert_eq!(cfg.initial, InitialData::ScaledBubble { a: 0.9, lambda: 1.0 });
        let text = to_json(&cfg);
        assert!(text.contains("\"t_max\""));
        assert!(text.contains("\"lambda\""));
    }

    #[test]
    fn round_trip_is_stable() {
        let cfg = parse_config(MINIMAL).unwrap();
        let again = parse_config(&to_json(&cfg)).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(to_json(&cfg), to_json(&again));
    }

    #[test]
    fn dimension_two_names_dimension() {
        let err = parse_config(r#"{"dimension": 2, "initial": {"family": "aW", "a": 0.9}}"#).unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "dimension"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_family_lists_registered() {
        let err = parse_config(r#"{"dimension": 4, "initial": {"family": "soliton", "a": 1}}"#).unwrap_err();
        let msg = err.to_string();
        for tag in REGISTERED_FAMILIES {
            assert!(msg.contains(tag), "{msg}");
        }
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_config("{\n  \"dimension\": 4,\n  \"initial\": {\"family\": \"aW\" \"a\": 1}\n}").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 10);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_config(r#"{"dimension": 4, "initial": {"family": "aW", "a": 1}, "solver": {"tol": -1}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "solver.tol"), "{err:?}");
        let err = parse_config(r#"{"dimension": 4, "initial": {"family": "aW", "a": 1}, "bogus": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn prepared_initial_data() {
        let cfg = parse_config(MINIMAL).unwrap();
        let prep = cfg.prepare().unwrap();
        assert_eq!(prep.set.verdict, crate::functionals::SetVerdict::MPlus);
        assert!(!prep.near_threshold());
        let at = cfg.variant(4, InitialData::ScaledBubble { a: 1.0, lambda: 1.0 }).prepare().unwrap();
        assert!(at.near_threshold());
        let five = cfg.variant(5, InitialData::Gaussian { amp: 0.1, width: 1.0 });
        assert_eq!(five.grid.radius, Some(1e3));
        assert_eq!(five.detect.kq_q, Some(default_q(5)));
    }
}
