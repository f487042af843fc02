//! Trajectories, datasets, noise specifications, and the regression view of a dataset.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Observed states sampled at a constant interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real = f64> {
    observations: Vec<DVector<T>>,
    dt: T,
}

impl<T: Real> Trajectory<T> {
    pub fn new(observations: Vec<DVector<T>>, dt: T) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 states, got {}",
                observations.len()
            )));
        }
        if !(dt > T::zero()) {
            return Err(Error::InvalidTrajectory(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let n_x = observations[0].len();
        if n_x == 0 {
            return Err(Error::InvalidTrajectory(
                "state dimension must be at least 1".into(),
            ));
        }
        if let Some((k, bad)) = observations
            .iter()
            .enumerate()
            .find(|(_, x)| x.len() != n_x)
        {
            return Err(Error::InvalidTrajectory(format!(
                "state {k} has dimension {}, expected {n_x}",
                bad.len()
            )));
        }
        Ok(Self { observations, dt })
    }

    pub fn from_rows(rows: &[Vec<T>], dt: T) -> Result<Self> {
        Self::new(
            rows.iter().map(|r| DVector::from_column_slice(r)).collect(),
            dt,
        )
    }

    pub fn observations(&self) -> &[DVector<T>] {
        &self.observations
    }

    pub fn state(&self, k: usize) -> &DVector<T> {
        &self.observations[k]
    }

    /// Number of observed states.
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn transitions(&self) -> usize {
        self.observations.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// The first `n_transitions + 1` states.
    pub fn truncated(&self, n_transitions: usize) -> Result<Self> {
        if n_transitions == 0 || n_transitions > self.transitions() {
            return Err(Error::Usage(format!(
                "requested {n_transitions} steps but the trajectory has {} transitions",
                self.transitions()
            )));
        }
        Ok(Self {
            observations: self.observations[..=n_transitions].to_vec(),
            dt: self.dt,
        })
    }
}

/// Process (`sigma_w`) and observation (`sigma_v`) noise covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec<T: Real = f64> {
    sigma_w: DMatrix<T>,
    sigma_v: DMatrix<T>,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(sigma_w: DMatrix<T>, sigma_v: DMatrix<T>) -> Result<Self> {
        if sigma_w.shape() != sigma_v.shape() {
            return Err(Error::InvalidNoise(format!(
                "sigma_w is {:?} but sigma_v is {:?}",
                sigma_w.shape(),
                sigma_v.shape()
            )));
        }
        check_psd(&sigma_w, "sigma_w")?;
        check_psd(&sigma_v, "sigma_v")?;
        Ok(Self { sigma_w, sigma_v })
    }

    /// `sigma_w * I` and `sigma_v * I`.
    pub fn isotropic(n_x: usize, sigma_w: T, sigma_v: T) -> Result<Self> {
        Self::new(
            DMatrix::identity(n_x, n_x) * sigma_w,
            DMatrix::identity(n_x, n_x) * sigma_v,
        )
    }

    pub fn sigma_w(&self) -> &DMatrix<T> {
        &self.sigma_w
    }

    pub fn sigma_v(&self) -> &DMatrix<T> {
        &self.sigma_v
    }

    pub fn dim(&self) -> usize {
        self.sigma_w.nrows()
    }

    /// Scalar GP noise variance: the mean of the diagonal of `sigma_w`.
    pub fn gp_noise_variance(&self) -> T {
        let n = self.dim();
        if n == 0 {
            return T::zero();
        }
        self.sigma_w.diagonal().sum() / T::from_usize_lossy(n)
    }
}

fn check_psd<T: Real>(m: &DMatrix<T>, name: &str) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidNoise(format!(
            "{name} must be square and non-empty"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidNoise(format!(
            "{name} has non-finite entries"
        )));
    }
    let scale = m.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let tol = T::c(1e-12).max(T::default_epsilon() * T::c(16.0)) * scale;
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::InvalidNoise(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sym = (m + m.transpose()) * T::c(0.5);
    let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
    if min_eig < -tol {
        return Err(Error::InvalidNoise(format!(
            "{name} is not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Nominal trajectories together with the noise they were recorded under.
#[derive(Debug, Clone)]
pub struct Dataset<T: Real = f64> {
    trajectories: Vec<Trajectory<T>>,
    noise: NoiseSpec<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(trajectories: Vec<Trajectory<T>>, noise: NoiseSpec<T>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidDataset("dataset has no trajectories".into()))?;
        let (n_x, dt) = (first.dim(), first.dt());
        for (i, t) in trajectories.iter().enumerate() {
            if t.dim() != n_x {
                return Err(Error::InvalidDataset(format!(
                    "trajectory {i} has dimension {}, expected {n_x}",
                    t.dim()
                )));
            }
            if t.dt() != dt {
                return Err(Error::InvalidDataset(format!(
                    "trajectory {i} has dt {}, expected {dt}",
                    t.dt()
                )));
            }
        }
        if noise.dim() != n_x {
            return Err(Error::InvalidDataset(format!(
                "noise is {}-dimensional but states are {n_x}-dimensional",
                noise.dim()
            )));
        }
        Ok(Self {
            trajectories,
            noise,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory<T>] {
        &self.trajectories
    }

    pub fn noise(&self) -> &NoiseSpec<T> {
        &self.noise
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    pub fn dt(&self) -> T {
        self.trajectories[0].dt()
    }

    pub fn transition_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::transitions).sum()
    }
}

/// Regression view of a dataset: states in `inputs`, one-step increments in `targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData<T: Real = f64> {
    inputs: DMatrix<T>,
    targets: DMatrix<T>,
}

impl<T: Real> RegressionData<T> {
    pub fn new(inputs: DMatrix<T>, targets: DMatrix<T>) -> Result<Self> {
        if inputs.shape() != targets.shape() {
            return Err(Error::InvalidDataset(format!(
                "inputs are {:?} but targets are {:?}",
                inputs.shape(),
                targets.shape()
            )));
        }
        if inputs.ncols() == 0 {
            return Err(Error::InvalidDataset(
                "state dimension must be at least 1".into(),
            ));
        }
        Ok(Self { inputs, targets })
    }

    /// No training pairs; a model fitted on this predicts the prior.
    pub fn empty(n_x: usize) -> Self {
        Self {
            inputs: DMatrix::zeros(0, n_x),
            targets: DMatrix::zeros(0, n_x),
        }
    }

    pub fn inputs(&self) -> &DMatrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<T> {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// Reorder rows; `order[i]` is the source row of output row `i`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(order),
            targets: self.targets.select_rows(order),
        }
    }
}

/// Stack every `(x_k, x_{k+1} - x_k)` pair, trajectory by trajectory.
pub fn build_regression_data<T: Real>(dataset: &Dataset<T>) -> Result<RegressionData<T>> {
    let n_x = dataset.dim();
    let m = dataset.transition_count();
    if m == 0 {
        return Err(Error::InvalidDataset("dataset has no transitions".into()));
    }
    let mut inputs = DMatrix::zeros(m, n_x);
    let mut targets = DMatrix::zeros(m, n_x);
    let mut row = 0;
    for traj in dataset.trajectories() {
        if traj.len() < 2 {
            return Err(Error::InvalidDataset(
                "trajectory shorter than 2 states".into(),
            ));
        }
        for pair in traj.observations().windows(2) {
            inputs.set_row(row, &pair[0].transpose());
            targets.set_row(row, &(&pair[1] - &pair[0]).transpose());
            row += 1;
        }
    }
    RegressionData::new(inputs, targets)
}
