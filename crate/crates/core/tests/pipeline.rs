use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use gpdetect::detector::score_trajectory;
use gpdetect::experiment::{run_experiment, Design, ExperimentConfig, Scale};
use gpdetect::simulator::Pendulum;
use gpdetect::{
    Benchmark, GpModel, KernelHyperparams, NoiseSpec, RegressionData, SystemSpec, Trajectory,
    Verdict,
};

fn shifted_pendulum(shift: f64) -> SystemSpec {
    let drift = Arc::new(Pendulum {
        phase_shift: shift,
        damping: 0.1,
    });
    SystemSpec::new(
        format!("pendulum_shift_{shift}"),
        drift,
        0.3,
        NoiseSpec::isotropic(2, 4e-4, 4e-4).unwrap(),
    )
    .unwrap()
}

fn detection_at(shift: f64) -> f64 {
    let scale = Scale {
        n_datasets: 20,
        n_hyperopt_gps: 5,
        n_query_trajectories: 40,
    };
    let mut cfg = ExperimentConfig::<f64>::pendulum(Benchmark::PendulumNominal, scale, 21).unwrap();
    cfg.query_system = shifted_pendulum(shift);
    let r = run_experiment(&cfg).unwrap();
    r.roc_for(10).unwrap().rate_at(0.2).unwrap()
}

#[test]
fn larger_anomaly_is_detected_more_often() {
    let small = detection_at(0.1);
    let large = detection_at(0.3);
    assert!(large > small, "shift 0.3: {large}, shift 0.1: {small}");
}

#[test]
fn paired_null_experiment_is_roughly_calibrated() {
    let scale = Scale {
        n_datasets: 400,
        n_hyperopt_gps: 10,
        n_query_trajectories: 400,
    };
    let mut cfg = ExperimentConfig::<f64>::pendulum(Benchmark::PendulumNominal, scale, 4).unwrap();
    cfg.design = Design::Paired;
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.failed_trials, 0);
    for si in 0..r.steps.len() {
        let p = r.pooled(si);
        assert_eq!(p.len(), 400);
        let fpr = p.iter().filter(|&&v| v < 0.2).count() as f64 / p.len() as f64;
        // 400 Bernoulli(0.2) draws: sd 0.02
        assert!((fpr - 0.2).abs() < 0.08, "steps {}: {fpr}", r.steps[si]);
    }
}

fn zero_mean_model() -> GpModel {
    let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, -0.5, -1.0, 0.8]);
    let reg = RegressionData::new(x, DMatrix::zeros(3, 2)).unwrap();
    GpModel::fit(&reg, KernelHyperparams::new(1.0, 0.5, 1e-2).unwrap()).unwrap()
}

#[test]
fn score_rejects_too_many_steps() {
    let q = Trajectory::from_rows(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![0.2, 0.0]], 0.3).unwrap();
    let noise = NoiseSpec::isotropic(2, 1e-3, 1e-3).unwrap();
    assert!(score_trajectory(&zero_mean_model(), &q, &noise, 0.05, Some(3)).is_err());
    assert_eq!(
        score_trajectory(&zero_mean_model(), &q, &noise, 0.05, Some(2))
            .unwrap()
            .steps_used,
        2
    );
}

#[test]
fn zero_residual_gives_p_one() {
    let x = DVector::from_vec(vec![0.4, -0.2]);
    let q = Trajectory::new(vec![x.clone(); 4], 0.3).unwrap();
    let noise = NoiseSpec::isotropic(2, 1e-3, 1e-3).unwrap();
    let r = score_trajectory(&zero_mean_model(), &q, &noise, 0.05, None).unwrap();
    assert_eq!(r.mahalanobis_sq, 0.0);
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.verdict, Verdict::Nominal);
    assert_eq!(r.dof, 6);
}
