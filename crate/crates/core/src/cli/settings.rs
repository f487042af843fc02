//! Versioned JSON documents written and read by the command-line tool.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiment::{Design, ExperimentConfig, HyperAveraging};
use crate::gp::persist::MatrixDoc;
use crate::gp::OptimizerSettings;
use crate::simulator::{benchmark_system, Benchmark};
use crate::types::NoiseSpec;

use super::io::round_num;

/// Version stamped on every file the CLI writes.
pub const FORMAT_VERSION: u32 = 1;

/// Parse a JSON document after checking its `format_version`.
pub fn load_versioned<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    };
    let v: Value = serde_json::from_str(&text).map_err(parse_err)?;
    let found = v
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "missing format_version".into(),
        })?;
    if found != FORMAT_VERSION as u64 {
        return Err(Error::FormatVersion {
            found: found as u32,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(v).map_err(parse_err)
}

/// Round every float in `v` to the 9 significant digits used for output.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(round_num(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_pretty_json<S: Serialize>(doc: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&round_json(serde_json::to_value(doc)?))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: String,
    pub n: usize,
    /// States per trajectory.
    pub len: usize,
    pub dt: f64,
    pub substeps: usize,
    pub sigma_w: MatrixDoc,
    pub sigma_v: MatrixDoc,
    pub seed: u64,
    /// Fixed initial state; when absent each trajectory starts uniformly inside `initial_box`.
    pub x0: Option<Vec<f64>>,
    pub initial_box: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub seed: u64,
    pub x0: Vec<f64>,
}

/// Sidecar describing a set of trajectory files: sampling interval, noise, seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub dt: f64,
    pub sigma_w: MatrixDoc,
    pub sigma_v: MatrixDoc,
    pub files: Vec<TrajectoryEntry>,
    #[serde(default)]
    pub config: Option<SimulateConfig>,
}

impl Manifest {
    pub fn noise(&self) -> Result<NoiseSpec<f64>> {
        NoiseSpec::new(self.sigma_w.to_matrix()?, self.sigma_v.to_matrix()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDoc {
    pub n_starts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

/// Everything needed to rerun an experiment; also the schema of `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    pub format_version: u32,
    pub nominal_system: String,
    pub query_system: String,
    pub dataset_sigma_w: MatrixDoc,
    pub dataset_sigma_v: MatrixDoc,
    pub query_sigma_w: MatrixDoc,
    pub query_sigma_v: MatrixDoc,
    pub substeps: usize,
    pub n_datasets: usize,
    pub n_hyperopt_gps: usize,
    pub n_query_trajectories: usize,
    pub trajectories_per_dataset: usize,
    pub states_per_trajectory: usize,
    pub initial_box: Vec<[f64; 2]>,
    pub query_x0: Vec<f64>,
    pub query_states: usize,
    pub steps_to_analyze: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub averaging: HyperAveraging,
    pub design: Design,
    pub optimizer: OptimizerDoc,
    pub master_seed: u64,
    pub max_failure_fraction: f64,
}

impl ExperimentSettings {
    pub fn from_config(cfg: &ExperimentConfig<f64>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            nominal_system: cfg.nominal_system.name.clone(),
            query_system: cfg.query_system.name.clone(),
            dataset_sigma_w: MatrixDoc::from_matrix(cfg.nominal_system.noise.sigma_w()),
            dataset_sigma_v: MatrixDoc::from_matrix(cfg.nominal_system.noise.sigma_v()),
            query_sigma_w: MatrixDoc::from_matrix(cfg.query_system.noise.sigma_w()),
            query_sigma_v: MatrixDoc::from_matrix(cfg.query_system.noise.sigma_v()),
            substeps: cfg.nominal_system.substeps,
            n_datasets: cfg.n_datasets,
            n_hyperopt_gps: cfg.n_hyperopt_gps,
            n_query_trajectories: cfg.n_query_trajectories,
            trajectories_per_dataset: cfg.trajectories_per_dataset,
            states_per_trajectory: cfg.states_per_trajectory,
            initial_box: cfg.initial_box.iter().map(|&(a, b)| [a, b]).collect(),
            query_x0: cfg.query_x0.iter().copied().collect(),
            query_states: cfg.query_states,
            steps_to_analyze: cfg.steps_to_analyze.clone(),
            thresholds: cfg.thresholds.clone(),
            averaging: cfg.averaging,
            design: cfg.design,
            optimizer: OptimizerDoc {
                n_starts: cfg.optimizer.n_starts,
                max_iter: cfg.optimizer.max_iter,
                tol: cfg.optimizer.tol,
            },
            master_seed: cfg.master_seed,
            max_failure_fraction: cfg.max_failure_fraction,
        }
    }

    pub fn to_config(&self) -> Result<ExperimentConfig<f64>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let system = |name: &str, w: &MatrixDoc, v: &MatrixDoc| {
            let b: Benchmark = name.parse()?;
            let mut s = benchmark_system(b, NoiseSpec::new(w.to_matrix()?, v.to_matrix()?)?)?;
            s.substeps = self.substeps;
            Ok::<_, Error>(s)
        };
        if self.substeps == 0 {
            return Err(Error::Usage("substeps must be at least 1".into()));
        }
        let cfg = ExperimentConfig {
            nominal_system: system(
                &self.nominal_system,
                &self.dataset_sigma_w,
                &self.dataset_sigma_v,
            )?,
            query_system: system(&self.query_system, &self.query_sigma_w, &self.query_sigma_v)?,
            n_datasets: self.n_datasets,
            n_hyperopt_gps: self.n_hyperopt_gps,
            n_query_trajectories: self.n_query_trajectories,
            trajectories_per_dataset: self.trajectories_per_dataset,
            states_per_trajectory: self.states_per_trajectory,
            initial_box: self.initial_box.iter().map(|b| (b[0], b[1])).collect(),
            query_x0: DVector::from_vec(self.query_x0.clone()),
            query_states: self.query_states,
            steps_to_analyze: self.steps_to_analyze.clone(),
            thresholds: self.thresholds.clone(),
            averaging: self.averaging,
            design: self.design,
            optimizer: OptimizerSettings {
                n_starts: self.optimizer.n_starts,
                max_iter: self.optimizer.max_iter,
                tol: self.optimizer.tol,
                seed: 0,
            },
            master_seed: self.master_seed,
            max_failure_fraction: self.max_failure_fraction,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
