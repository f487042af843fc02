//! Model-free anomaly detection for sampled dynamical systems.
//!
//! A Gaussian process is trained on state increments of nominal trajectories.
//! A new trajectory is scored by stacking its one-step residuals against the
//! GP prediction, whitening them with their full covariance, and reading off
//! the chi-squared upper-tail probability of the whitened norm.
//!
//! All numerical code is generic over [`Real`] (implemented for `f32` and
//! `f64`). The `*F64` / `*F32` aliases below name the common instantiations.

// `!(x > 0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod kernel;
pub mod optim;
pub mod residual;
pub mod scalar;
pub mod seed;
pub mod simulator;
pub mod types;

pub use detector::{chi2_sf, classify, score_trajectory, DetectionResult, Verdict};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport, HyperAveraging};
pub use gp::{log_marginal_likelihood, optimize_hyperparams, GpModel, OptimizerSettings};
pub use kernel::{KernelHyperparams, SquaredExponential, StationaryKernel};
pub use residual::{assemble_sigma_t, residuals, whiten, ResidualReport};
pub use scalar::Real;
pub use simulator::{benchmark_system, Benchmark, SystemSpec};
pub use types::{build_regression_data, Dataset, NoiseSpec, RegressionData, Trajectory};

pub type TrajectoryF64 = Trajectory<f64>;
pub type TrajectoryF32 = Trajectory<f32>;
pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type NoiseSpecF64 = NoiseSpec<f64>;
pub type NoiseSpecF32 = NoiseSpec<f32>;
pub type RegressionDataF64 = RegressionData<f64>;
pub type RegressionDataF32 = RegressionData<f32>;
pub type KernelHyperparamsF64 = KernelHyperparams<f64>;
pub type KernelHyperparamsF32 = KernelHyperparams<f32>;
pub type GpModelF64 = GpModel<f64>;
pub type GpModelF32 = GpModel<f32>;
pub type ResidualReportF64 = ResidualReport<f64>;
pub type ResidualReportF32 = ResidualReport<f32>;
pub type DetectionResultF64 = DetectionResult<f64>;
pub type DetectionResultF32 = DetectionResult<f32>;
pub type SystemSpecF64 = SystemSpec<f64>;
pub type SystemSpecF32 = SystemSpec<f32>;
