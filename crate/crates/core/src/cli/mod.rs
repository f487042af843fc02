//! The `gpdetect` command-line tool: `simulate`, `train`, `score`, `experiment`.
//!
//! Exit status is 0 on success (or a nominal verdict), 2 for an anomalous
//! verdict, and 1 on any error.

pub mod io;
pub mod settings;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::detector::{score_trajectory, Verdict};
use crate::error::{Error, Result};
use crate::experiment::{
    ks_distance_uniform, run_experiment, Design, ExperimentConfig, HyperAveraging, Scale,
};
use crate::gp::persist::{HyperDoc, MatrixDoc};
use crate::gp::{optimize_hyperparams, GpModel, OptimizerSettings};
use crate::kernel::KernelHyperparams;
use crate::seed::{derive_seed, rng_from_seed};
use crate::simulator::{sample_initial_condition, simulate_trajectory, Benchmark, SystemSpec};
use crate::types::{build_regression_data, Dataset, NoiseSpec, Trajectory};

use io::{fmt_num, parse_covariance, read_trajectory, write_trajectory};
use settings::{
    load_versioned, to_pretty_json, ExperimentSettings, Manifest, OptimizerDoc, SimulateConfig,
    TrajectoryEntry, FORMAT_VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ANOMALOUS: i32 = 2;

const OUT_DIR_ENV: &str = "GPDETECT_OUT_DIR";
const STREAM_SIMULATE: u64 = 10;

#[derive(Debug, Parser)]
#[command(
    name = "gpdetect",
    version,
    about = "Model-free anomaly detection for sampled dynamical systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories of a built-in system and write them as CSV files.
    Simulate(SimulateArgs),
    /// Fit a GP to trajectory files and save the model.
    Train(TrainArgs),
    /// Score one trajectory against a saved model.
    Score(ScoreArgs),
    /// Run a Monte Carlo detection experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// pendulum_nominal, pendulum_anomalous, vdp_nominal or vdp_anomalous.
    #[arg(long)]
    pub system: String,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// States per trajectory.
    #[arg(long, default_value_t = 14)]
    pub len: usize,
    /// Process noise covariance: a scalar s (s·I) or a CSV matrix file.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub sigma_w: String,
    /// Observation noise covariance: a scalar s (s·I) or a CSV matrix file.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub sigma_v: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed initial state, comma separated. Default: uniform inside --box.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Initial-state bounds `lo,hi`, applied to every component.
    #[arg(long = "box", default_value = "-2,2", allow_hyphen_values = true)]
    pub init_box: String,
    #[arg(long, default_value_t = 0.3)]
    pub dt: f64,
    /// RK4 substeps per sample.
    #[arg(long, default_value_t = 10)]
    pub substeps: usize,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Trajectory CSV files, in addition to those listed by --manifest.
    pub files: Vec<PathBuf>,
    /// Sidecar written by `simulate`; supplies files, dt and noise.
    #[arg(long, alias = "config")]
    pub manifest: Option<PathBuf>,
    /// Process noise of the training data; overrides the manifest.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_w: Option<String>,
    /// Fixed hyperparameters `sf=<σ_f>,l=<ℓ>`; skips optimization.
    #[arg(long)]
    pub hyper: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Model file. Default: model.json in $GPDETECT_OUT_DIR or the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Query process noise: a scalar s (s·I) or a CSV matrix file.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_w: Option<String>,
    /// Query observation noise: a scalar s (s·I) or a CSV matrix file.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_v: Option<String>,
    /// Take both noise matrices from a manifest instead.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[arg(long, default_value_t = crate::detector::DEFAULT_P_THRESHOLD)]
    pub p_thr: f64,
    /// Analyze only the first k transitions.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Also write the detection record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the full residual report (residuals, covariance, Jacobians) here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkArg {
    Pendulum,
    Vdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryArg {
    Nominal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Geometric,
    Arithmetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Crossed,
    Paired,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub benchmark: Option<BenchmarkArg>,
    /// Full experiment settings (the `config` object of a summary.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = QueryArg::Anomalous)]
    pub query: QueryArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// 500 datasets, 20 optimized GPs, 800 query trajectories.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long)]
    pub datasets: Option<usize>,
    #[arg(long)]
    pub hyperopt_gps: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long, value_enum)]
    pub averaging: Option<AveragingArg>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    /// Also write every p-value to p_values.csv.
    #[arg(long)]
    pub p_values: bool,
    /// Print the resolved settings and exit without running.
    #[arg(long)]
    pub dry_run: bool,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
}

/// Parse `args` (including the program name), run, and return the exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| EXIT_OK),
        Command::Train(a) => cmd_train(a).map(|_| EXIT_OK),
        Command::Score(a) => cmd_score(a).map(|v| match v {
            Verdict::Nominal => EXIT_OK,
            Verdict::Anomalous => EXIT_ANOMALOUS,
        }),
        Command::Experiment(a) => cmd_experiment(a).map(|_| EXIT_OK),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Usage(format!("bad {what} '{s}': {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Usage(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    print!("{}", to_pretty_json(v)?);
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Manifest> {
    let which: Benchmark = a.system.parse()?;
    let n_x = which.drift::<f64>().dim();
    let noise = NoiseSpec::new(
        parse_covariance(&a.sigma_w, n_x)?,
        parse_covariance(&a.sigma_v, n_x)?,
    )?;
    let mut spec = SystemSpec::new(which.name(), which.drift(), a.dt, noise)?;
    if a.substeps == 0 {
        return Err(Error::Usage("substeps must be at least 1".into()));
    }
    spec.substeps = a.substeps;
    if a.n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let x0 = a.x0.as_deref().map(|s| parse_list(s, "--x0")).transpose()?;
    if let Some(x) = &x0 {
        if x.len() != n_x {
            return Err(Error::dim(n_x, x.len()));
        }
    }
    let bounds = parse_list(&a.init_box, "--box")?;
    let [lo, hi] = bounds[..] else {
        return Err(Error::Usage(format!(
            "--box needs lo,hi, got '{}'",
            a.init_box
        )));
    };
    let initial_box = vec![(lo, hi); n_x];

    create_dir(&a.out)?;
    let width = a.n.saturating_sub(1).to_string().len().max(3);
    let mut files = Vec::with_capacity(a.n);
    for i in 0..a.n {
        let seed = derive_seed(a.seed, STREAM_SIMULATE, i as u64);
        let mut rng = rng_from_seed(seed);
        let start = match &x0 {
            Some(x) => DVector::from_column_slice(x),
            None => sample_initial_condition(&initial_box, &mut rng)?,
        };
        let traj = simulate_trajectory(&spec, &start, a.len, &mut rng)?;
        let name = format!("traj_{i:0width$}.csv");
        write_trajectory(&a.out.join(&name), &traj).map_err(|e| {
            Error::Usage(format!("cannot write {}: {e}", a.out.join(&name).display()))
        })?;
        files.push(TrajectoryEntry {
            path: name,
            seed,
            x0: start.iter().copied().collect(),
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dt: a.dt,
        sigma_w: MatrixDoc::from_matrix(spec.noise.sigma_w()),
        sigma_v: MatrixDoc::from_matrix(spec.noise.sigma_v()),
        files,
        config: Some(SimulateConfig {
            system: which.name().into(),
            n: a.n,
            len: a.len,
            dt: a.dt,
            substeps: a.substeps,
            sigma_w: MatrixDoc::from_matrix(spec.noise.sigma_w()),
            sigma_v: MatrixDoc::from_matrix(spec.noise.sigma_v()),
            seed: a.seed,
            x0,
            initial_box: initial_box.iter().map(|&(l, h)| [l, h]).collect(),
        }),
    };
    let text = to_pretty_json(&manifest)?;
    write_file(&a.out.join("manifest.json"), &text)?;
    print!("{text}");
    Ok(manifest)
}

/// Resolved settings of a `train` run, stored in the model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub format_version: u32,
    pub files: Vec<String>,
    pub dt: f64,
    pub sigma_w: MatrixDoc,
    pub sigma_n_sq: f64,
    /// Set when hyperparameters were given rather than optimized.
    pub fixed_hyper: Option<HyperDoc>,
    pub optimizer: OptimizerDoc,
    pub seed: u64,
}

fn parse_hyper(s: &str, sigma_n_sq: f64) -> Result<KernelHyperparams<f64>> {
    let (mut sf, mut l) = (None, None);
    for part in s.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| {
            Error::Usage(format!("--hyper expects sf=<value>,l=<value>, got '{s}'"))
        })?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Usage(format!("bad --hyper value '{v}': {e}")))?;
        match k.trim() {
            "sf" | "sigma_f" => sf = Some(v),
            "l" | "length_scale" => l = Some(v),
            other => {
                return Err(Error::Usage(format!(
                    "unknown --hyper key '{other}'; use sf and l"
                )))
            }
        }
    }
    match (sf, l) {
        (Some(sf), Some(l)) => KernelHyperparams::new(sf, l, sigma_n_sq),
        _ => Err(Error::Usage(format!(
            "--hyper needs both sf and l, got '{s}'"
        ))),
    }
}

pub fn cmd_train(a: &TrainArgs) -> Result<GpModel<f64>> {
    let manifest: Option<Manifest> = a.manifest.as_deref().map(load_versioned).transpose()?;
    let mut paths: Vec<PathBuf> = Vec::new();
    if let (Some(m), Some(mpath)) = (&manifest, &a.manifest) {
        let base = mpath.parent().unwrap_or(Path::new(""));
        paths.extend(m.files.iter().map(|f| base.join(&f.path)));
    }
    paths.extend(a.files.iter().cloned());
    if paths.is_empty() {
        return Err(Error::Usage("no trajectory files given".into()));
    }
    let trajs = paths
        .iter()
        .map(|p| read_trajectory(p))
        .collect::<Result<Vec<Trajectory<f64>>>>()?;
    let n_x = trajs[0].dim();
    let sigma_w: DMatrix<f64> = match (&a.sigma_w, &manifest) {
        (Some(s), _) => parse_covariance(s, n_x)?,
        (None, Some(m)) => m.sigma_w.to_matrix()?,
        (None, None) => {
            return Err(Error::Usage(
                "training noise unknown: pass --sigma-w or --manifest".into(),
            ))
        }
    };
    if let Some(m) = &manifest {
        if (m.dt - trajs[0].dt()).abs() > 1e-9 * m.dt.abs() {
            return Err(Error::InvalidDataset(format!(
                "manifest dt {} differs from trajectory dt {}",
                m.dt,
                trajs[0].dt()
            )));
        }
    }
    let dt = trajs[0].dt();
    let noise = NoiseSpec::new(sigma_w.clone(), DMatrix::zeros(n_x, n_x))?;
    let sigma_n_sq = noise.gp_noise_variance();
    let reg = build_regression_data(&Dataset::new(trajs, noise)?)?;

    let optimizer = OptimizerSettings {
        n_starts: a.starts,
        max_iter: a.max_iter,
        tol: a.tol,
        seed: a.seed,
    };
    let fixed = a
        .hyper
        .as_deref()
        .map(|s| parse_hyper(s, sigma_n_sq))
        .transpose()?;
    let hyper = match fixed {
        Some(h) => h,
        None => optimize_hyperparams(&reg, sigma_n_sq, &optimizer)?,
    };
    let model = GpModel::fit(&reg, hyper)?;

    let config = TrainConfig {
        format_version: FORMAT_VERSION,
        files: paths.iter().map(|p| p.display().to_string()).collect(),
        dt,
        sigma_w: MatrixDoc::from_matrix(&sigma_w),
        sigma_n_sq,
        fixed_hyper: fixed.as_ref().map(HyperDoc::from),
        optimizer: OptimizerDoc {
            n_starts: optimizer.n_starts,
            max_iter: optimizer.max_iter,
            tol: optimizer.tol,
        },
        seed: a.seed,
    };
    let mut doc = model.to_document();
    doc.provenance = serde_json::to_value(&config)?;
    let out = match &a.out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map_or_else(|| PathBuf::from("."), PathBuf::from)
            .join("model.json"),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(&out, &text)?;
    print_json(&json!({
        "format_version": FORMAT_VERSION,
        "config": config,
        "model": out.display().to_string(),
        "n_train": model.n_train(),
        "log_marginal_likelihood": doc.log_marginal_likelihood,
        "hyper": doc.hyper,
    }))?;
    Ok(model)
}

fn load_model(path: &Path) -> Result<(GpModel<f64>, Option<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let doc: crate::gp::persist::ModelDocument =
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
    let dt = doc.provenance.get("dt").and_then(|v| v.as_f64());
    Ok((GpModel::from_document(&doc)?, dt))
}

pub fn cmd_score(a: &ScoreArgs) -> Result<Verdict> {
    let (model, model_dt) = load_model(&a.model)?;
    let q = read_trajectory(&a.trajectory)?;
    if q.dim() != model.dim() {
        return Err(Error::dim(model.dim(), q.dim()));
    }
    if let Some(dt) = model_dt {
        if (dt - q.dt()).abs() > 1e-6 * dt.abs() {
            return Err(Error::InvalidTrajectory(format!(
                "trajectory dt {} differs from the model's training dt {dt}",
                q.dt()
            )));
        }
    }
    let n_x = model.dim();
    let manifest: Option<Manifest> = a.noise.as_deref().map(load_versioned).transpose()?;
    let pick = |arg: &Option<String>, from: Option<&MatrixDoc>, name: &str| match (arg, from) {
        (Some(s), _) => parse_covariance(s, n_x),
        (None, Some(m)) => m.to_matrix(),
        (None, None) => Err(Error::Usage(format!(
            "query noise unknown: pass --{name} or --noise"
        ))),
    };
    let noise = NoiseSpec::new(
        pick(&a.sigma_w, manifest.as_ref().map(|m| &m.sigma_w), "sigma-w")?,
        pick(&a.sigma_v, manifest.as_ref().map(|m| &m.sigma_v), "sigma-v")?,
    )?;
    if let Some(s) = a.steps {
        if s == 0 || s > q.transitions() {
            return Err(Error::Usage(format!(
                "--steps {s} out of range: the trajectory has {} transitions (1..={})",
                q.transitions(),
                q.transitions()
            )));
        }
    }
    let res = score_trajectory(&model, &q, &noise, a.p_thr, a.steps)?;
    let out = json!({
        "format_version": FORMAT_VERSION,
        "config": {
            "model": a.model.display().to_string(),
            "trajectory": a.trajectory.display().to_string(),
            "sigma_w": MatrixDoc::from_matrix(noise.sigma_w()),
            "sigma_v": MatrixDoc::from_matrix(noise.sigma_v()),
            "p_thr": a.p_thr,
            "steps": res.steps_used,
        },
        "result": res.record(),
    });
    let text = to_pretty_json(&out)?;
    if let Some(p) = &a.out {
        write_file(p, &text)?;
    }
    if let Some(p) = &a.report {
        let mut r = res.report.to_json();
        r["format_version"] = json!(FORMAT_VERSION);
        write_file(p, &to_pretty_json(&r)?)?;
    }
    print!("{text}");
    Ok(res.verdict)
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig<f64>> {
    let mut cfg = match (&a.config, a.benchmark) {
        (Some(path), _) => load_versioned::<ExperimentSettings>(path)?.to_config()?,
        (None, Some(b)) => {
            let scale = if a.paper_scale {
                Scale::FULL
            } else {
                Scale::DESK
            };
            let seed = a.seed.unwrap_or(0);
            match (b, a.query) {
                (BenchmarkArg::Pendulum, QueryArg::Nominal) => {
                    ExperimentConfig::pendulum(Benchmark::PendulumNominal, scale, seed)?
                }
                (BenchmarkArg::Pendulum, QueryArg::Anomalous) => {
                    ExperimentConfig::pendulum(Benchmark::PendulumAnomalous, scale, seed)?
                }
                (BenchmarkArg::Vdp, QueryArg::Nominal) => {
                    ExperimentConfig::vdp(Benchmark::VdpNominal, scale, seed)?
                }
                (BenchmarkArg::Vdp, QueryArg::Anomalous) => {
                    ExperimentConfig::vdp(Benchmark::VdpAnomalous, scale, seed)?
                }
            }
        }
        (None, None) => return Err(Error::Usage("pass --benchmark or --config".into())),
    };
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = a.datasets {
        cfg.n_datasets = n;
    }
    if let Some(n) = a.hyperopt_gps {
        cfg.n_hyperopt_gps = n;
    }
    if let Some(n) = a.queries {
        cfg.n_query_trajectories = n;
    }
    if let Some(m) = a.averaging {
        cfg.averaging = match m {
            AveragingArg::Geometric => HyperAveraging::Geometric,
            AveragingArg::Arithmetic => HyperAveraging::Arithmetic,
        };
    }
    if let Some(d) = a.design {
        cfg.design = match d {
            DesignArg::Crossed => Design::Crossed,
            DesignArg::Paired => Design::Paired,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(a)?;
    let settings = ExperimentSettings::from_config(&cfg);
    if a.dry_run {
        return print_json(&serde_json::to_value(&settings)?);
    }
    create_dir(&a.out)?;
    let report = run_experiment(&cfg)?;

    for roc in &report.roc {
        let mut s = String::from("p_thr,detection_rate,n_scores\n");
        for &(t, r) in &roc.points {
            s.push_str(&format!("{},{},{}\n", fmt_num(t), fmt_num(r), roc.n_scores));
        }
        write_file(&a.out.join(format!("roc_{}.csv", roc.steps)), &s)?;
    }
    for d in &report.diagnostics {
        let mut s = String::from("step,sigma_noise_sq,sigma_gp_sq,eps_f_sq\n");
        for k in 0..d.steps {
            s.push_str(&format!(
                "{},{},{},{}\n",
                k + 1,
                fmt_num(d.sigma_noise_sq[k]),
                fmt_num(d.sigma_gp_sq[k]),
                fmt_num(d.eps_f_sq[k])
            ));
        }
        write_file(&a.out.join(format!("diagnostics_{}.csv", d.steps)), &s)?;
    }
    if a.p_values {
        let mut s = String::from("gp,trajectory");
        for st in &report.steps {
            s.push_str(&format!(",p_{st}"));
        }
        s.push('\n');
        for pair in &report.scores {
            s.push_str(&format!("{},{}", pair.gp, pair.trajectory));
            for p in &pair.p {
                s.push(',');
                if let Some(p) = p {
                    s.push_str(&fmt_num(*p));
                }
            }
            s.push('\n');
        }
        write_file(&a.out.join("p_values.csv"), &s)?;
    }

    let results: Vec<_> = report
        .steps
        .iter()
        .enumerate()
        .map(|(si, &steps)| {
            let pooled = report.pooled(si);
            let rate = |t: f64| {
                pooled.iter().filter(|&&p| p < t).count() as f64 / pooled.len().max(1) as f64
            };
            let rates: Vec<_> = [0.05, 0.1, 0.2]
                .iter()
                .map(|&t| json!({"p_thr": t, "rate": rate(t)}))
                .collect();
            json!({
                "steps": steps,
                "n_scores": pooled.len(),
                "ks_distance_uniform": ks_distance_uniform(&pooled),
                "detection_rate": rates,
            })
        })
        .collect();
    let summary = json!({
        "format_version": FORMAT_VERSION,
        "config": settings,
        "n_gps": report.n_gps,
        "n_trajectories": report.n_trajectories,
        "total_trials": report.total_trials,
        "failed_trials": report.failed_trials,
        "averaged_hyperparams": HyperDoc::from(&report.averaged_hyperparams),
        "optimized_hyperparams": report.optimized_hyperparams.iter().map(HyperDoc::from).collect::<Vec<_>>(),
        "results": results,
    });
    let text = to_pretty_json(&summary)?;
    write_file(&a.out.join("summary.json"), &text)?;
    print!("{text}");
    Ok(())
}
