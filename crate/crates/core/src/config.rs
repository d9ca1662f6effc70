//! Experiment configuration (`spectral-lab/experiment/v1`).
//!
//! Relative paths in a config file (model file, output directory) resolve
//! against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use crate::boundary::{BoundaryPath, DEFAULT_COUNT, DEFAULT_RATIO, DEFAULT_Y0};
use crate::error::{Result, SpectralError};
use crate::linalg::{CMatrix, CVector};
use crate::model::{make_model, ModelDescription, RiggedModel};
use crate::serial::rows_to_matrix;

pub const EXPERIMENT_SCHEMA: &str = "spectral-lab/experiment/v1";

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridSpec {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl GridSpec {
    fn values(&self, field: &str) -> Result<Vec<f64>> {
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Linspace { start, stop, count } => linspace(*start, *stop, *count),
        };
        if v.is_empty() {
            return Err(field_error(field, "grid is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(field_error(field, "grid values must be finite"));
        }
        Ok(v)
    }
}

/// `count` points from `start` to `stop`; both ends are hit exactly.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathSpec {
    #[serde(default = "default_y0")]
    y0: f64,
    #[serde(default = "default_ratio")]
    ratio: f64,
    #[serde(default = "default_count")]
    count: usize,
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            y0: DEFAULT_Y0,
            ratio: DEFAULT_RATIO,
            count: DEFAULT_COUNT,
        }
    }
}

fn default_y0() -> f64 {
    DEFAULT_Y0
}
fn default_ratio() -> f64 {
    DEFAULT_RATIO
}
fn default_count() -> usize {
    DEFAULT_COUNT
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessSpec {
    #[serde(default)]
    explicit: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default = "default_random_count")]
    random_count: usize,
    #[serde(default)]
    seed: u64,
}

fn default_random_count() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Cauchy tolerance of the boundary probes.
    #[serde(default = "default_probe")]
    pub probe: f64,
    /// Relative null-space threshold.
    #[serde(default = "default_null")]
    pub null_space: f64,
    /// Radius of the vanishing disk for resonance curves.
    #[serde(default = "default_vanishing")]
    pub vanishing: f64,
    /// Eigenvalue cut `1 - tol` of the averaged projector.
    #[serde(default = "default_intersection")]
    pub intersection: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            probe: default_probe(),
            null_space: default_null(),
            vanishing: default_vanishing(),
            intersection: default_intersection(),
        }
    }
}

fn default_probe() -> f64 {
    1e-8
}
fn default_null() -> f64 {
    1e-7
}
fn default_vanishing() -> f64 {
    1e-6
}
fn default_intersection() -> f64 {
    1e-8
}

/// Upper limit on the probe tolerance; keeps "converged" and "growing" exclusive.
pub const MAX_PROBE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConjectureSpec {
    #[serde(default)]
    psi: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: String,
    model: Value,
    lambda_grid: GridSpec,
    #[serde(default)]
    path: PathSpec,
    #[serde(default)]
    r_grid: Option<GridSpec>,
    #[serde(default)]
    n_max: Option<usize>,
    #[serde(default)]
    s_grid: Option<GridSpec>,
    #[serde(default)]
    witnesses: WitnessSpec,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    oscillation_tail: Option<usize>,
    #[serde(default)]
    conjecture: ConjectureSpec,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: RiggedModel,
    pub lambda_grid: Vec<f64>,
    /// Schedule template; `lambda` is filled in per grid point.
    pub path: BoundaryPath,
    pub r_grid: Vec<f64>,
    pub n_max: usize,
    pub s_grid: Vec<f64>,
    pub explicit_witnesses: Vec<CMatrix>,
    pub random_count: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub oscillation_tail: usize,
    /// Vectors for the quadratic-form traces.
    pub psi: Vec<CVector>,
    pub output_dir: PathBuf,
}

pub const DEFAULT_OUTPUT_DIR: &str = "spectral-lab-report";
pub const DEFAULT_OSCILLATION_TAIL: usize = 5;

fn field_error(location: &str, message: impl Into<String>) -> SpectralError {
    SpectralError::ConfigParse {
        location: location.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            field_error(
                &path.display().to_string(),
                format!("cannot read config: {e}"),
            )
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    /// Parses and validates; `base_dir` anchors relative paths.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
            field_error(
                &format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        if raw.schema != EXPERIMENT_SCHEMA {
            return Err(field_error(
                "schema",
                format!("expected {EXPERIMENT_SCHEMA:?}, found {:?}", raw.schema),
            ));
        }
        let model = load_model(&raw.model, base_dir)?;
        let k = model.rigging_dim();

        let lambda_grid = raw.lambda_grid.values("lambda_grid")?;
        let path = BoundaryPath {
            lambda: lambda_grid[0],
            y0: raw.path.y0,
            ratio: raw.path.ratio,
            count: raw.path.count,
        };
        path.validate()
            .map_err(|e| field_error("path", e.to_string()))?;

        let r_grid = match &raw.r_grid {
            Some(g) => g.values("r_grid")?,
            None => vec![1.0, 10.0, 100.0, 1e3, 1e4],
        };
        if r_grid.iter().any(|r| !(*r > 0.0)) || r_grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(field_error(
                "r_grid",
                "values must be positive and strictly ascending",
            ));
        }
        let n_max = raw.n_max.unwrap_or((k / 2).max(1));
        if n_max == 0 {
            return Err(field_error("n_max", "must be at least 1"));
        }
        let s_grid = match &raw.s_grid {
            Some(g) => g.values("s_grid")?,
            None => linspace(-2.0, 2.0, 41),
        };

        let mut explicit_witnesses = Vec::new();
        for (i, rows) in raw.witnesses.explicit.iter().enumerate() {
            let location = format!("witnesses.explicit[{i}]");
            let m = rows_to_matrix(rows).map_err(|e| field_error(&location, e))?;
            let j = model
                .check_coupling(&m)
                .map_err(|e| field_error(&location, e.to_string()))?;
            explicit_witnesses.push(j);
        }

        let t = raw.tolerances;
        for (name, value) in [
            ("tolerances.probe", t.probe),
            ("tolerances.null_space", t.null_space),
            ("tolerances.vanishing", t.vanishing),
            ("tolerances.intersection", t.intersection),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(field_error(name, format!("{value} must be positive")));
            }
        }
        if t.probe > MAX_PROBE_TOL {
            return Err(field_error(
                "tolerances.probe",
                format!("{} exceeds the maximum {MAX_PROBE_TOL}", t.probe),
            ));
        }

        let oscillation_tail = raw.oscillation_tail.unwrap_or(DEFAULT_OSCILLATION_TAIL);
        if oscillation_tail == 0 || oscillation_tail > path.count {
            return Err(field_error(
                "oscillation_tail",
                format!("must lie in 1..={}", path.count),
            ));
        }

        let mut psi = Vec::new();
        for (i, v) in raw.conjecture.psi.iter().enumerate() {
            let location = format!("conjecture.psi[{i}]");
            if v.len() != k {
                return Err(field_error(
                    &location,
                    format!("length {} but K = {k}", v.len()),
                ));
            }
            let column: Vec<Vec<[f64; 2]>> = v.iter().map(|p| vec![*p]).collect();
            let m = rows_to_matrix(&column).map_err(|e| field_error(&location, e))?;
            psi.push(m.column(0).into_owned());
        }

        let output_dir = match raw.output_dir {
            Some(p) if p.is_relative() => base_dir.join(p),
            Some(p) => p,
            None => base_dir.join(DEFAULT_OUTPUT_DIR),
        };

        Ok(Self {
            model,
            lambda_grid,
            path,
            r_grid,
            n_max,
            s_grid,
            explicit_witnesses,
            random_count: raw.witnesses.random_count,
            seed: raw.witnesses.seed,
            tolerances: t,
            oscillation_tail,
            psi,
            output_dir,
        })
    }
}

fn load_model(value: &Value, base_dir: &Path) -> Result<RiggedModel> {
    match value {
        Value::String(p) => {
            let path = base_dir.join(p);
            RiggedModel::from_file(&path)
        }
        Value::Object(map) if map.contains_key("schema") => {
            RiggedModel::from_json(&value.to_string())
                .map_err(|e| field_error("model", e.to_string()))
        }
        Value::Object(_) => {
            let desc = ModelDescription::deserialize(value)
                .map_err(|e| field_error("model", e.to_string()))?;
            make_model(desc).map_err(|e| field_error("model", e.to_string()))
        }
        _ => Err(field_error(
            "model",
            "expected a model file path or an inline model object",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": "spectral-lab/experiment/v1",
        "model": {"kind": "finite_matrix",
                  "h0": [[[1,0],[0,0]],[[0,0],[2,0]]],
                  "f": [[[1,0],[0,0]],[[0,0],[1,0]]]},
        "lambda_grid": [5.0]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.lambda_grid, vec![5.0]);
        assert_eq!(cfg.path.count, DEFAULT_COUNT);
        assert_eq!(cfg.s_grid.len(), 41);
        assert_eq!(cfg.s_grid[20], 0.0);
        assert_eq!(cfg.n_max, 1);
        assert_eq!(cfg.output_dir, Path::new("/tmp/x").join(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn linspace_hits_both_ends() {
        let v = linspace(-2.0, 2.0, 41);
        assert_eq!((v[0], v[20], v[40]), (-2.0, 0.0, 2.0));
        assert_eq!(linspace(3.0, 4.0, 1), vec![3.0]);
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = ExperimentConfig::from_json("{\n  \"schema\": ,\n}", Path::new(".")).unwrap_err();
        match err {
            SpectralError::ConfigParse { location, .. } => assert!(location.starts_with("line 2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_fields_are_named() {
        let bad = MINIMAL.replace(
            "\"lambda_grid\": [5.0]",
            "\"lambda_grid\": [5.0], \"tolerances\": {\"probe\": -1}",
        );
        match ExperimentConfig::from_json(&bad, Path::new(".")).unwrap_err() {
            SpectralError::ConfigParse { location, .. } => assert_eq!(location, "tolerances.probe"),
            other => panic!("unexpected {other:?}"),
        }
        let wrong_schema = MINIMAL.replace("experiment/v1", "experiment/v0");
        assert!(matches!(
            ExperimentConfig::from_json(&wrong_schema, Path::new(".")),
            Err(SpectralError::ConfigParse { .. })
        ));
    }

    #[test]
    fn missing_model_file_is_a_load_error() {
        let text = MINIMAL.replace(
            &MINIMAL[MINIMAL.find("{\"kind\"").unwrap()..MINIMAL.find("\"lambda_grid\"").unwrap()],
            "\"does-not-exist.json\",\n        ",
        );
        assert!(matches!(
            ExperimentConfig::from_json(&text, Path::new("/nonexistent")),
            Err(SpectralError::ModelLoad { .. })
        ));
    }
}
