//! Monte Carlo evaluation: many nominal datasets, many GPs, many query
//! trajectories, reduced to detection-rate-vs-threshold curves.
//!
//! Every random draw comes from a generator seeded by
//! `(master_seed, stream, index)`, so the report does not depend on the
//! number of worker threads.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::score_trajectory;
use crate::error::{Error, Result};
use crate::gp::{optimize_hyperparams, GpModel, OptimizerSettings};
use crate::kernel::KernelHyperparams;
use crate::scalar::Real;
use crate::seed::{derive_seed, trial_rng};
use crate::simulator::{
    benchmark_system, sample_initial_condition, simulate_trajectory, simulate_with_truth,
    Benchmark, SystemSpec,
};
use crate::types::{build_regression_data, Dataset, NoiseSpec, RegressionData};

const STREAM_DATASET: u64 = 1;
const STREAM_HYPEROPT: u64 = 2;
const STREAM_QUERY: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperAveraging {
    /// Mean in log space.
    #[default]
    Geometric,
    Arithmetic,
}

/// Pool hyperparameters from several trainings. `σ_n²` is taken from the first.
pub fn average_hyperparams<T: Real>(
    hs: &[KernelHyperparams<T>],
    mode: HyperAveraging,
) -> Result<KernelHyperparams<T>> {
    let first = hs
        .first()
        .ok_or_else(|| Error::Usage("cannot average an empty set of hyperparameters".into()))?;
    let n = T::from_usize_lossy(hs.len());
    let mean = |f: fn(&KernelHyperparams<T>) -> T| match mode {
        HyperAveraging::Geometric => (hs.iter().fold(T::zero(), |a, h| a + f(h).ln()) / n).exp(),
        HyperAveraging::Arithmetic => hs.iter().fold(T::zero(), |a, h| a + f(h)) / n,
    };
    KernelHyperparams::new(
        mean(|h| h.sigma_f),
        mean(|h| h.length_scale),
        first.sigma_n_sq,
    )
}

/// `(p_thr, fraction of p-values strictly below p_thr)` for each threshold.
pub fn detection_curve(p_values: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if p_values.is_empty() {
        return Err(Error::Usage(
            "no p-values to build a detection curve from".into(),
        ));
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t))
        || thresholds.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::Usage(
            "thresholds must be sorted ascending within [0, 1]".into(),
        ));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|&p| p < t) as f64 / total))
        .collect())
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and Uniform[0, 1].
pub fn ks_distance_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_value_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

/// `0, 0.01, …, 1`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Which (GP, trajectory) pairs get scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Every GP scores every query trajectory.
    #[default]
    Crossed,
    /// Trajectory `j` is scored only by GP `j mod n_datasets`, so no two
    /// scores share a GP or a trajectory when the counts are equal.
    Paired,
}

impl Design {
    fn scores(self, gp: usize, traj: usize, n_gps: usize) -> bool {
        match self {
            Design::Crossed => true,
            Design::Paired => traj % n_gps == gp,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<T: Real = f64> {
    /// Generates the training datasets, with the dataset noise.
    pub nominal_system: SystemSpec<T>,
    /// Generates the query trajectories, with the query noise.
    pub query_system: SystemSpec<T>,
    pub n_datasets: usize,
    pub n_hyperopt_gps: usize,
    pub n_query_trajectories: usize,
    pub trajectories_per_dataset: usize,
    pub states_per_trajectory: usize,
    pub initial_box: Vec<(T, T)>,
    pub query_x0: DVector<T>,
    /// States per query trajectory.
    pub query_states: usize,
    pub steps_to_analyze: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub averaging: HyperAveraging,
    pub design: Design,
    pub optimizer: OptimizerSettings,
    pub master_seed: u64,
    pub max_failure_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub n_datasets: usize,
    pub n_hyperopt_gps: usize,
    pub n_query_trajectories: usize,
}

impl Scale {
    pub const DESK: Scale = Scale {
        n_datasets: 50,
        n_hyperopt_gps: 10,
        n_query_trajectories: 100,
    };
    pub const FULL: Scale = Scale {
        n_datasets: 500,
        n_hyperopt_gps: 20,
        n_query_trajectories: 800,
    };
}

impl<T: Real> ExperimentConfig<T> {
    #[allow(clippy::too_many_arguments)]
    fn benchmark(
        nominal: Benchmark,
        query: Benchmark,
        dataset_noise: NoiseSpec<T>,
        query_noise: NoiseSpec<T>,
        trajectories_per_dataset: usize,
        states_per_trajectory: usize,
        scale: Scale,
        master_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            nominal_system: benchmark_system(nominal, dataset_noise)?,
            query_system: benchmark_system(query, query_noise)?,
            n_datasets: scale.n_datasets,
            n_hyperopt_gps: scale.n_hyperopt_gps,
            n_query_trajectories: scale.n_query_trajectories,
            trajectories_per_dataset,
            states_per_trajectory,
            initial_box: vec![(T::c(-2.0), T::c(2.0)); 2],
            query_x0: DVector::from_vec(vec![T::c(0.7), T::c(0.4)]),
            query_states: 21,
            steps_to_analyze: vec![10, 20],
            thresholds: default_thresholds(),
            averaging: HyperAveraging::Geometric,
            design: Design::Crossed,
            optimizer: OptimizerSettings::default(),
            master_seed,
            max_failure_fraction: 0.01,
        })
    }

    /// Damped pendulum with a 0.3 rad phase shift as the anomaly: 10 × 14
    /// training states with `Σ_w = 1e-2 I`, queries with `Σ_w = Σ_v = 4e-4 I`.
    pub fn pendulum(query: Benchmark, scale: Scale, master_seed: u64) -> Result<Self> {
        Self::benchmark(
            Benchmark::PendulumNominal,
            query,
            NoiseSpec::isotropic(2, T::c(1e-2), T::zero())?,
            NoiseSpec::isotropic(2, T::c(4e-4), T::c(4e-4))?,
            10,
            14,
            scale,
            master_seed,
        )
    }

    /// Van der Pol with μ = 0.55 as the anomaly: 30 × 8 training states with
    /// `Σ_w = 1e-2 I`, queries with `Σ_w = Σ_v = 1e-3 I`.
    pub fn vdp(query: Benchmark, scale: Scale, master_seed: u64) -> Result<Self> {
        Self::benchmark(
            Benchmark::VdpNominal,
            query,
            NoiseSpec::isotropic(2, T::c(1e-2), T::zero())?,
            NoiseSpec::isotropic(2, T::c(1e-3), T::c(1e-3))?,
            30,
            8,
            scale,
            master_seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.n_datasets,
            self.n_hyperopt_gps,
            self.n_query_trajectories,
            self.trajectories_per_dataset,
        ];
        if counts.contains(&0) {
            return Err(Error::Usage(
                "all experiment counts must be at least 1".into(),
            ));
        }
        if self.n_hyperopt_gps > self.n_datasets {
            return Err(Error::Usage(format!(
                "n_hyperopt_gps ({}) exceeds n_datasets ({})",
                self.n_hyperopt_gps, self.n_datasets
            )));
        }
        if self.states_per_trajectory < 2 {
            return Err(Error::Usage(
                "training trajectories need at least 2 states".into(),
            ));
        }
        let max_steps = self.steps_to_analyze.iter().copied().max().unwrap_or(0);
        if self.steps_to_analyze.contains(&0) || self.steps_to_analyze.is_empty() {
            return Err(Error::Usage(
                "steps_to_analyze must be non-empty and positive".into(),
            ));
        }
        if max_steps + 1 > self.query_states {
            return Err(Error::Usage(format!(
                "analyzing {max_steps} steps needs {} query states, only {} configured",
                max_steps + 1,
                self.query_states
            )));
        }
        let n = self.nominal_system.dim();
        if self.query_system.dim() != n || self.query_x0.len() != n || self.initial_box.len() != n {
            return Err(Error::Usage(
                "systems, query_x0, and initial_box must share the state dimension".into(),
            ));
        }
        Ok(())
    }
}

/// Detection rates for one analyzed-steps setting.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub steps: usize,
    pub points: Vec<(f64, f64)>,
    pub n_scores: usize,
}

impl RocCurve {
    pub fn rate_at(&self, p_thr: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|(t, _)| *t == p_thr)
            .map(|&(_, r)| r)
    }
}

/// Per-step means over all scores: noise-driven residual variance, GP
/// posterior variance, and the squared dynamics mismatch at the true states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsTrace {
    pub steps: usize,
    pub sigma_noise_sq: Vec<f64>,
    pub sigma_gp_sq: Vec<f64>,
    pub eps_f_sq: Vec<f64>,
}

/// p-values of one (GP, trajectory) pair, one per analyzed-steps setting;
/// `None` marks an excluded trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    pub gp: usize,
    pub trajectory: usize,
    pub p: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport<T: Real = f64> {
    pub n_gps: usize,
    pub n_trajectories: usize,
    pub steps: Vec<usize>,
    /// Scored pairs sorted by `(gp, trajectory)`.
    pub scores: Vec<PairScores>,
    pub roc: Vec<RocCurve>,
    pub diagnostics: Vec<DiagnosticsTrace>,
    pub averaged_hyperparams: KernelHyperparams<T>,
    pub optimized_hyperparams: Vec<KernelHyperparams<T>>,
    pub failed_trials: usize,
    pub total_trials: usize,
    pub master_seed: u64,
}

impl<T: Real> ExperimentReport<T> {
    /// All successful p-values for the `si`-th steps setting, GP-major.
    pub fn pooled(&self, si: usize) -> Vec<f64> {
        self.scores.iter().filter_map(|s| s.p[si]).collect()
    }

    /// p-value of `(gp, trajectory)` at the `si`-th steps setting, if scored.
    pub fn p_value(&self, gp: usize, trajectory: usize, si: usize) -> Option<f64> {
        let i = self
            .scores
            .binary_search_by(|s| (s.gp, s.trajectory).cmp(&(gp, trajectory)))
            .ok()?;
        self.scores[i].p[si]
    }

    pub fn roc_for(&self, steps: usize) -> Option<&RocCurve> {
        self.roc.iter().find(|r| r.steps == steps)
    }
}

fn generate_dataset<T: Real>(cfg: &ExperimentConfig<T>, index: usize) -> Result<RegressionData<T>> {
    let mut rng = trial_rng(cfg.master_seed, STREAM_DATASET, index as u64);
    let trajs = (0..cfg.trajectories_per_dataset)
        .map(|_| {
            let x0 = sample_initial_condition(&cfg.initial_box, &mut rng)?;
            simulate_trajectory(
                &cfg.nominal_system,
                &x0,
                cfg.states_per_trajectory,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    build_regression_data(&Dataset::new(trajs, cfg.nominal_system.noise.clone())?)
}

struct GpScores {
    pairs: Vec<PairScores>,
    /// Per steps setting, per step: summed noise and GP variances over successful scores.
    noise_sum: Vec<Vec<f64>>,
    gp_sum: Vec<Vec<f64>>,
    ok_count: Vec<usize>,
    failed: usize,
}

/// Run the full protocol described by `cfg`.
pub fn run_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<ExperimentReport<T>> {
    cfg.validate()?;
    let sigma_n_sq = cfg.nominal_system.noise.gp_noise_variance();

    // (1) datasets
    let datasets: Vec<Result<RegressionData<T>>> = (0..cfg.n_datasets)
        .into_par_iter()
        .map(|i| generate_dataset(cfg, i))
        .collect();

    // (2) hyperparameters from the first few datasets
    let optimized: Vec<Result<KernelHyperparams<T>>> = (0..cfg.n_hyperopt_gps)
        .into_par_iter()
        .map(|i| {
            let reg = datasets[i]
                .as_ref()
                .map_err(|e| Error::OptimizationFailed(e.to_string()))?;
            let opts = OptimizerSettings {
                seed: derive_seed(cfg.master_seed, STREAM_HYPEROPT, i as u64),
                ..cfg.optimizer
            };
            optimize_hyperparams(reg, sigma_n_sq, &opts)
        })
        .collect();
    let optimized_ok: Vec<KernelHyperparams<T>> = optimized
        .iter()
        .filter_map(|r| r.as_ref().ok().copied())
        .collect();
    let averaged = average_hyperparams(&optimized_ok, cfg.averaging).map_err(|_| {
        Error::OptimizationFailed("every hyperparameter optimization failed".into())
    })?;

    // (3) models; the optimized ones keep their own hyperparameters
    let models: Vec<Option<GpModel<T>>> = (0..cfg.n_datasets)
        .into_par_iter()
        .map(|i| {
            let reg = datasets[i].as_ref().ok()?;
            let hyper = match optimized.get(i) {
                Some(Ok(h)) => *h,
                Some(Err(_)) => return None,
                None => averaged,
            };
            GpModel::fit(reg, hyper).ok()
        })
        .collect();
    drop(datasets);

    // (4) query trajectories and their dynamics mismatch at the true states
    let queries = (0..cfg.n_query_trajectories)
        .into_par_iter()
        .map(|j| {
            let mut rng = trial_rng(cfg.master_seed, STREAM_QUERY, j as u64);
            simulate_with_truth(&cfg.query_system, &cfg.query_x0, cfg.query_states, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_steps = *cfg.steps_to_analyze.iter().max().expect("validated");
    let eps_f_sq: Vec<Vec<f64>> = queries
        .par_iter()
        .map(|q| {
            q.truth[..max_steps]
                .iter()
                .map(|x| {
                    let fq = cfg.query_system.transition_increment(x)?;
                    let fd = cfg.nominal_system.transition_increment(x)?;
                    Ok((fq - fd).norm_squared().f64())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    // (5) score every (GP, trajectory, steps) combination
    let n_settings = cfg.steps_to_analyze.len();
    let p_thr = T::c(0.5);
    let scores: Vec<GpScores> = models
        .par_iter()
        .enumerate()
        .map(|(i, model)| {
            let attempted = (0..queries.len())
                .filter(|&j| cfg.design.scores(i, j, cfg.n_datasets))
                .count();
            let mut out = GpScores {
                pairs: Vec::new(),
                noise_sum: cfg.steps_to_analyze.iter().map(|&s| vec![0.0; s]).collect(),
                gp_sum: cfg.steps_to_analyze.iter().map(|&s| vec![0.0; s]).collect(),
                ok_count: vec![0; n_settings],
                failed: 0,
            };
            let Some(model) = model else {
                out.failed = attempted * n_settings;
                return out;
            };
            for (j, q) in queries.iter().enumerate() {
                if !cfg.design.scores(i, j, cfg.n_datasets) {
                    continue;
                }
                let mut pair = PairScores {
                    gp: i,
                    trajectory: j,
                    p: vec![None; n_settings],
                };
                for (si, &s) in cfg.steps_to_analyze.iter().enumerate() {
                    let Ok(res) = score_trajectory(
                        model,
                        &q.observed,
                        &cfg.query_system.noise,
                        p_thr,
                        Some(s),
                    ) else {
                        out.failed += 1;
                        continue;
                    };
                    pair.p[si] = Some(res.p_value.f64());
                    out.ok_count[si] += 1;
                    for (k, (nv, gv)) in res
                        .report
                        .noise_variances()
                        .iter()
                        .zip(&res.report.gp_variances)
                        .enumerate()
                    {
                        out.noise_sum[si][k] += nv.f64();
                        out.gp_sum[si][k] += gv.f64();
                    }
                }
                out.pairs.push(pair);
            }
            out
        })
        .collect();

    let total_trials = (0..cfg.n_datasets)
        .map(|i| {
            (0..queries.len())
                .filter(|&j| cfg.design.scores(i, j, cfg.n_datasets))
                .count()
        })
        .sum::<usize>()
        * n_settings;
    let failed_trials = scores.iter().map(|s| s.failed).sum::<usize>();
    if failed_trials as f64 > cfg.max_failure_fraction * total_trials as f64 {
        return Err(Error::TooManyFailures {
            failed: failed_trials,
            total: total_trials,
        });
    }

    let pairs: Vec<PairScores> = scores
        .iter()
        .flat_map(|s| s.pairs.iter().cloned())
        .collect();
    let mut roc = Vec::with_capacity(n_settings);
    let mut diagnostics = Vec::with_capacity(n_settings);
    for (si, &s) in cfg.steps_to_analyze.iter().enumerate() {
        let pooled: Vec<f64> = pairs.iter().filter_map(|s| s.p[si]).collect();
        roc.push(RocCurve {
            steps: s,
            points: detection_curve(&pooled, &cfg.thresholds)?,
            n_scores: pooled.len(),
        });
        let ok: usize = scores.iter().map(|g| g.ok_count[si]).sum();
        let denom = ok.max(1) as f64;
        let mean_over = |pick: fn(&GpScores) -> &Vec<Vec<f64>>| -> Vec<f64> {
            (0..s)
                .map(|k| scores.iter().map(|g| pick(g)[si][k]).sum::<f64>() / denom)
                .collect()
        };
        diagnostics.push(DiagnosticsTrace {
            steps: s,
            sigma_noise_sq: mean_over(|g| &g.noise_sum),
            sigma_gp_sq: mean_over(|g| &g.gp_sum),
            eps_f_sq: (0..s)
                .map(|k| eps_f_sq.iter().map(|e| e[k]).sum::<f64>() / eps_f_sq.len() as f64)
                .collect(),
        });
    }

    Ok(ExperimentReport {
        n_gps: cfg.n_datasets,
        n_trajectories: cfg.n_query_trajectories,
        steps: cfg.steps_to_analyze.clone(),
        scores: pairs,
        roc,
        diagnostics,
        averaged_hyperparams: averaged,
        optimized_hyperparams: optimized_ok,
        failed_trials,
        total_trials,
        master_seed: cfg.master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(sf: f64, l: f64) -> KernelHyperparams {
        KernelHyperparams::new(sf, l, 0.01).unwrap()
    }

    #[test]
    fn averaging() {
        let one = average_hyperparams(&[hp(1.3, 0.7)], HyperAveraging::Geometric).unwrap();
        assert!((one.sigma_f - 1.3).abs() < 1e-15 && (one.length_scale - 0.7).abs() < 1e-15);
        let g =
            average_hyperparams(&[hp(1.0, 1.0), hp(1.0, 4.0)], HyperAveraging::Geometric).unwrap();
        assert!((g.length_scale - 2.0).abs() < 1e-14);
        assert_eq!(g.sigma_n_sq, 0.01);
        let a =
            average_hyperparams(&[hp(1.0, 1.0), hp(1.0, 4.0)], HyperAveraging::Arithmetic).unwrap();
        assert!((a.length_scale - 2.5).abs() < 1e-14);
        let hs = [hp(0.5, 1.0), hp(2.0, 0.3), hp(1.1, 3.0)];
        let rev = [hs[2], hs[0], hs[1]];
        let x = average_hyperparams(&hs, HyperAveraging::Geometric).unwrap();
        let y = average_hyperparams(&rev, HyperAveraging::Geometric).unwrap();
        assert!(
            (x.sigma_f - y.sigma_f).abs() < 1e-14
                && (x.length_scale - y.length_scale).abs() < 1e-14
        );
        assert!(average_hyperparams::<f64>(&[], HyperAveraging::Geometric).is_err());
    }

    #[test]
    fn detection_curve_cases() {
        assert_eq!(
            detection_curve(&[0.5, 0.5], &[0.4, 0.6]).unwrap(),
            vec![(0.4, 0.0), (0.6, 1.0)]
        );
        let c = detection_curve(&[0.1, 0.3, 0.9], &[0.5]).unwrap();
        assert!((c[0].1 - 2.0 / 3.0).abs() < 1e-15);
        let c = detection_curve(&[0.0, 0.2, 0.7, 0.99], &[0.0, 1.0]).unwrap();
        assert_eq!(c, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(detection_curve(&[], &[0.5]).is_err());
        assert!(detection_curve(&[0.5], &[0.6, 0.5]).is_err());
    }

    #[test]
    fn ks_distance_of_perfect_grid() {
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_distance_uniform(&s) - 0.5 / n as f64).abs() < 1e-12);
        assert!(ks_distance_uniform(&[0.0; 10]) == 1.0);
    }

    #[test]
    fn small_run_is_deterministic_and_monotone() {
        let scale = Scale {
            n_datasets: 4,
            n_hyperopt_gps: 2,
            n_query_trajectories: 6,
        };
        let mut cfg =
            ExperimentConfig::<f64>::pendulum(Benchmark::PendulumAnomalous, scale, 11).unwrap();
        cfg.optimizer.n_starts = 2;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.scores.len(), 24);
        assert!(a.p_value(3, 5, 1).is_some());
        assert!(a.p_value(4, 0, 0).is_none());
        assert_eq!(a.roc, b.roc);
        assert_eq!(a.diagnostics, b.diagnostics);
        for r in &a.roc {
            assert_eq!(r.n_scores, 24);
            assert!(r.points.windows(2).all(|w| w[0].1 <= w[1].1));
            assert_eq!(r.rate_at(0.0), Some(0.0));
            assert_eq!(r.rate_at(1.0), Some(1.0));
        }
        assert!(a.pooled(0).iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(a.diagnostics[1].eps_f_sq.len(), 20);
    }

    #[test]
    fn paired_design_scores_each_trajectory_once() {
        let scale = Scale {
            n_datasets: 3,
            n_hyperopt_gps: 1,
            n_query_trajectories: 7,
        };
        let mut cfg =
            ExperimentConfig::<f64>::pendulum(Benchmark::PendulumNominal, scale, 2).unwrap();
        cfg.design = Design::Paired;
        cfg.optimizer.n_starts = 1;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.scores.len(), 7);
        assert_eq!(r.total_trials, 14);
        assert!(r.scores.iter().all(|s| s.trajectory % 3 == s.gp));
    }

    #[test]
    fn config_validation() {
        let mut cfg =
            ExperimentConfig::<f64>::vdp(Benchmark::VdpAnomalous, Scale::DESK, 1).unwrap();
        cfg.n_hyperopt_gps = 60;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg =
            ExperimentConfig::<f64>::vdp(Benchmark::VdpAnomalous, Scale::DESK, 1).unwrap();
        cfg.steps_to_analyze = vec![25];
        assert!(cfg.validate().is_err());
    }
}
