//! Trajectory generation: RK4 flow of a continuous drift, sampled at a fixed
//! interval, with additive process and observation noise at the sample level.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{NoiseSpec, Trajectory};

pub const BENCHMARK_DT: f64 = 0.3;
pub const DEFAULT_SUBSTEPS: usize = 10;

/// Autonomous continuous dynamics `ẋ = f(x)`.
pub trait Drift<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<T>) -> DVector<T>;
}

/// Damped pendulum `[x₂, −sin(x₁ + shift) − damping·x₂]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pendulum {
    pub phase_shift: f64,
    pub damping: f64,
}

impl<T: Real> Drift<T> for Pendulum {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &DVector<T>) -> DVector<T> {
        let (th, om) = (x[0], x[1]);
        DVector::from_vec(vec![
            om,
            -(th + T::c(self.phase_shift)).sin() - T::c(self.damping) * om,
        ])
    }
}

/// Van der Pol oscillator `[x₂, μ(1 − x₁²)x₂ − x₁]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanDerPol {
    pub mu: f64,
}

impl<T: Real> Drift<T> for VanDerPol {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &DVector<T>) -> DVector<T> {
        let (p, v) = (x[0], x[1]);
        DVector::from_vec(vec![v, T::c(self.mu) * (T::one() - p * p) * v - p])
    }
}

/// Wraps a closure as a [`Drift`].
pub struct FnDrift<F> {
    dim: usize,
    f: F,
}

impl<F> FnDrift<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F> Drift<T> for FnDrift<F>
where
    F: Fn(&DVector<T>) -> DVector<T> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<T>) -> DVector<T> {
        (self.f)(x)
    }
}

/// A sampled system: drift, sampling interval, and sample-level noise.
#[derive(Clone)]
pub struct SystemSpec<T: Real = f64> {
    pub name: String,
    pub drift: Arc<dyn Drift<T>>,
    pub dt: T,
    pub noise: NoiseSpec<T>,
    pub substeps: usize,
}

impl<T: Real> fmt::Debug for SystemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dt", &self.dt)
            .field("noise", &self.noise)
            .field("substeps", &self.substeps)
            .finish()
    }
}

impl<T: Real> SystemSpec<T> {
    pub fn new(
        name: impl Into<String>,
        drift: Arc<dyn Drift<T>>,
        dt: T,
        noise: NoiseSpec<T>,
    ) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::Usage(format!("dt must be positive, got {dt}")));
        }
        if drift.dim() != noise.dim() {
            return Err(Error::dim(drift.dim(), noise.dim()));
        }
        Ok(Self {
            name: name.into(),
            drift,
            dt,
            noise,
            substeps: DEFAULT_SUBSTEPS,
        })
    }

    pub fn with_noise(&self, noise: NoiseSpec<T>) -> Result<Self> {
        Self::new(self.name.clone(), self.drift.clone(), self.dt, noise).map(|s| Self {
            substeps: self.substeps,
            ..s
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Deterministic one-sample increment `flow(x) − x`.
    pub fn transition_increment(&self, x: &DVector<T>) -> Result<DVector<T>> {
        Ok(flow_map(self.drift.as_ref(), x, self.dt, self.substeps)? - x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    PendulumNominal,
    PendulumAnomalous,
    VdpNominal,
    VdpAnomalous,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::PendulumNominal,
        Benchmark::PendulumAnomalous,
        Benchmark::VdpNominal,
        Benchmark::VdpAnomalous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::PendulumNominal => "pendulum_nominal",
            Benchmark::PendulumAnomalous => "pendulum_anomalous",
            Benchmark::VdpNominal => "vdp_nominal",
            Benchmark::VdpAnomalous => "vdp_anomalous",
        }
    }

    pub fn drift<T: Real>(self) -> Arc<dyn Drift<T>> {
        match self {
            Benchmark::PendulumNominal => Arc::new(Pendulum {
                phase_shift: 0.0,
                damping: 0.1,
            }),
            Benchmark::PendulumAnomalous => Arc::new(Pendulum {
                phase_shift: 0.3,
                damping: 0.1,
            }),
            Benchmark::VdpNominal => Arc::new(VanDerPol { mu: 0.4 }),
            Benchmark::VdpAnomalous => Arc::new(VanDerPol { mu: 0.55 }),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Benchmark::ALL.iter().map(|b| b.name()).collect();
                Error::Usage(format!(
                    "unknown system '{s}'; valid names: {}",
                    names.join(", ")
                ))
            })
    }
}

/// One of the built-in systems, sampled at `ΔT = 0.3`.
pub fn benchmark_system<T: Real>(which: Benchmark, noise: NoiseSpec<T>) -> Result<SystemSpec<T>> {
    SystemSpec::new(which.name(), which.drift(), T::c(BENCHMARK_DT), noise)
}

fn eval_checked<T: Real>(f: &dyn Drift<T>, x: &DVector<T>) -> Result<DVector<T>> {
    let v = f.eval(x);
    if v.len() != x.len() {
        return Err(Error::dim(x.len(), v.len()));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericalBlowup {
            state: x.iter().map(|c| c.f64()).collect(),
        });
    }
    Ok(v)
}

/// Classical RK4 over `dt` in `substeps` equal steps.
pub fn flow_map<T: Real>(
    f: &dyn Drift<T>,
    x: &DVector<T>,
    dt: T,
    substeps: usize,
) -> Result<DVector<T>> {
    if substeps == 0 {
        return Err(Error::Usage("substeps must be at least 1".into()));
    }
    let h = dt / T::from_usize_lossy(substeps);
    let (half, sixth, two) = (T::c(0.5), T::one() / T::c(6.0), T::c(2.0));
    let mut y = x.clone();
    for _ in 0..substeps {
        let k1 = eval_checked(f, &y)?;
        let k2 = eval_checked(f, &(&y + &k1 * (h * half)))?;
        let k3 = eval_checked(f, &(&y + &k2 * (h * half)))?;
        let k4 = eval_checked(f, &(&y + &k3 * h))?;
        y += (k1 + (k2 + k3) * two + k4) * (h * sixth);
    }
    Ok(y)
}

/// Draws from `N(0, Σ)` for a positive semidefinite `Σ`.
#[derive(Debug, Clone)]
pub struct GaussianSampler<T: Real = f64> {
    factor: DMatrix<T>,
    zero: bool,
}

impl<T: Real> GaussianSampler<T> {
    pub fn new(cov: &DMatrix<T>) -> Self {
        let zero = cov.iter().all(|v| *v == T::zero());
        let factor = match Cholesky::new(cov.clone()) {
            Some(c) => c.l(),
            None => {
                // semidefinite: V diag(√max(λ, 0))
                let eig = SymmetricEigen::new(cov.clone());
                let roots = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
                eig.eigenvectors * DMatrix::from_diagonal(&roots)
            }
        };
        Self { factor, zero }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<T> {
        let n = self.factor.nrows();
        if self.zero {
            return DVector::zeros(n);
        }
        let z = DVector::from_fn(n, |_, _| T::standard_normal(rng));
        &self.factor * z
    }
}

/// Observed trajectory plus the hidden true states that produced it.
#[derive(Debug, Clone)]
pub struct SimulatedTrajectory<T: Real = f64> {
    pub observed: Trajectory<T>,
    pub truth: Vec<DVector<T>>,
}

/// `x_{k+1} = flow(x_k) + w_k`, `x̂_k = x_k + v_k`, returning both sequences.
pub fn simulate_with_truth<T: Real, R: Rng + ?Sized>(
    spec: &SystemSpec<T>,
    x0: &DVector<T>,
    n_states: usize,
    rng: &mut R,
) -> Result<SimulatedTrajectory<T>> {
    if n_states < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 states, got {n_states}"
        )));
    }
    if x0.len() != spec.dim() {
        return Err(Error::dim(spec.dim(), x0.len()));
    }
    let w = GaussianSampler::new(spec.noise.sigma_w());
    let v = GaussianSampler::new(spec.noise.sigma_v());
    let mut truth = Vec::with_capacity(n_states);
    let mut obs = Vec::with_capacity(n_states);
    let mut x = x0.clone();
    for k in 0..n_states {
        obs.push(&x + v.sample(rng));
        if k + 1 < n_states {
            let next = flow_map(spec.drift.as_ref(), &x, spec.dt, spec.substeps)? + w.sample(rng);
            truth.push(std::mem::replace(&mut x, next));
        }
    }
    truth.push(x);
    Ok(SimulatedTrajectory {
        observed: Trajectory::new(obs, spec.dt)?,
        truth,
    })
}

pub fn simulate_trajectory<T: Real, R: Rng + ?Sized>(
    spec: &SystemSpec<T>,
    x0: &DVector<T>,
    n_states: usize,
    rng: &mut R,
) -> Result<Trajectory<T>> {
    Ok(simulate_with_truth(spec, x0, n_states, rng)?.observed)
}

/// Uniform draw inside the box `bounds[i].0 ≤ x_i ≤ bounds[i].1`.
pub fn sample_initial_condition<T: Real, R: Rng + ?Sized>(
    bounds: &[(T, T)],
    rng: &mut R,
) -> Result<DVector<T>> {
    if bounds.is_empty() {
        return Err(Error::Usage(
            "initial-condition box has no dimensions".into(),
        ));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Usage(format!(
                "invalid bounds [{lo}, {hi}] in dimension {i}"
            )));
        }
    }
    Ok(DVector::from_iterator(
        bounds.len(),
        bounds.iter().map(|&(lo, hi)| {
            if lo == hi {
                lo
            } else {
                T::uniform(rng, lo, hi).min(hi)
            }
        }),
    ))
}
