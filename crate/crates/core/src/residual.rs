//! Residuals against a trained GP, their joint covariance, and whitening.
//!
//! For step `k` (0-based, `k < n_steps - 1`) the residual is
//! `ε_k = (x̂_{k+1} − x̂_k) − F̂(x̂_k)`. Under the nominal hypothesis it is
//! `−A_k v_k + v_{k+1} + w_k + ε_GP,k` with `A_k = J_k + I`, so
//!
//! * `Σ_kk     = A_k Σ_v A_kᵀ + Σ_v + Σ_w + Σ_GP(x̂_k, x̂_k) I`
//! * `Σ_k,k+1  = −Σ_v A_{k+1}ᵀ + Σ_GP(x̂_k, x̂_{k+1}) I`
//! * `Σ_k+1,k  = −A_{k+1} Σ_v + Σ_GP(x̂_{k+1}, x̂_k) I`
//! * `Σ_kl     = Σ_GP(x̂_k, x̂_l) I` for `|k − l| ≥ 2`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde_json::json;

use crate::error::{Error, Result};
use crate::gp::{cholesky_with_jitter, GpModel};
use crate::scalar::Real;
use crate::types::{NoiseSpec, Trajectory};

/// Relative jitter levels for the residual covariance.
pub const SIGMA_T_JITTER_LADDER: [f64; 5] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

#[derive(Debug, Clone)]
pub struct ResidualReport<T: Real = f64> {
    /// Stacked residual, step-major.
    pub eps: DVector<T>,
    pub sigma_t: DMatrix<T>,
    pub whitened: DVector<T>,
    pub mahalanobis_sq: T,
    pub dof: usize,
    /// GP Jacobian at each analyzed observed state.
    pub jacobians: Vec<DMatrix<T>>,
    /// Posterior GP variance at each analyzed observed state.
    pub gp_variances: Vec<T>,
    /// Absolute jitter added to the diagonal of `sigma_t`.
    pub jitter: T,
}

fn check_against_model<T: Real>(m: &GpModel<T>, q: &Trajectory<T>) -> Result<()> {
    if q.dim() != m.dim() {
        return Err(Error::dim(m.dim(), q.dim()));
    }
    Ok(())
}

/// `ε_k = (x̂_{k+1} − x̂_k) − F̂(x̂_k)` stacked in step order.
pub fn residuals<T: Real>(m: &GpModel<T>, q: &Trajectory<T>) -> Result<DVector<T>> {
    check_against_model(m, q)?;
    let n = q.dim();
    let mut eps = DVector::zeros(n * q.transitions());
    for (k, pair) in q.observations().windows(2).enumerate() {
        let pred = m.predict_mean(pair[0].as_slice())?;
        let e = &pair[1] - &pair[0] - pred;
        eps.rows_mut(k * n, n).copy_from(&e);
    }
    Ok(eps)
}

struct Assembly<T: Real> {
    sigma_t: DMatrix<T>,
    chol: Cholesky<T, nalgebra::Dyn>,
    jitter: T,
    jacobians: Vec<DMatrix<T>>,
    gp_variances: Vec<T>,
}

fn assemble<T: Real>(
    m: &GpModel<T>,
    q: &Trajectory<T>,
    noise: &NoiseSpec<T>,
) -> Result<Assembly<T>> {
    check_against_model(m, q)?;
    let n = q.dim();
    if noise.dim() != n {
        return Err(Error::dim(n, noise.dim()));
    }
    let steps = q.transitions();
    let points: Vec<&[T]> = q.observations()[..steps]
        .iter()
        .map(|x| x.as_slice())
        .collect();
    let jacobians = points
        .iter()
        .map(|x| m.jacobian(x))
        .collect::<Result<Vec<_>>>()?;
    let gp_cov = m.posterior_cov_matrix(&points)?;

    let (sv, sw) = (noise.sigma_v(), noise.sigma_w());
    let eye = DMatrix::<T>::identity(n, n);
    let a: Vec<DMatrix<T>> = jacobians.iter().map(|j| j + &eye).collect();

    let dim = n * steps;
    let mut s = DMatrix::zeros(dim, dim);
    for k in 0..steps {
        let diag = &a[k] * sv * a[k].transpose() + sv + sw;
        s.view_mut((k * n, k * n), (n, n)).copy_from(&diag);
        if k + 1 < steps {
            let upper = -(sv * a[k + 1].transpose());
            s.view_mut((k * n, (k + 1) * n), (n, n)).copy_from(&upper);
            s.view_mut(((k + 1) * n, k * n), (n, n))
                .copy_from(&upper.transpose());
        }
    }
    for k in 0..steps {
        for l in 0..steps {
            let g = gp_cov[(k, l)];
            for i in 0..n {
                s[(k * n + i, l * n + i)] += g;
            }
        }
    }
    let s = (&s + s.transpose()) * T::c(0.5);
    let (chol, jitter) = cholesky_with_jitter(&s, &SIGMA_T_JITTER_LADDER).ok_or_else(|| {
        Error::DegenerateCovariance {
            min_eigenvalue: SymmetricEigen::new(s.clone()).eigenvalues.min().f64(),
        }
    })?;
    let mut sigma_t = s;
    for i in 0..dim {
        sigma_t[(i, i)] += jitter;
    }
    let gp_variances = (0..steps).map(|k| gp_cov[(k, k)]).collect();
    Ok(Assembly {
        sigma_t,
        chol,
        jitter,
        jacobians,
        gp_variances,
    })
}

/// Full covariance of the stacked residual under the nominal hypothesis,
/// symmetrized and jittered to positive definiteness if needed.
pub fn assemble_sigma_t<T: Real>(
    m: &GpModel<T>,
    q: &Trajectory<T>,
    noise: &NoiseSpec<T>,
) -> Result<DMatrix<T>> {
    Ok(assemble(m, q, noise)?.sigma_t)
}

/// Cholesky whitening `L⁻¹ ε` with `Σ = L Lᵀ`, together with `εᵀ Σ⁻¹ ε`.
pub fn whiten<T: Real>(eps: &DVector<T>, sigma_t: &DMatrix<T>) -> Result<(DVector<T>, T)> {
    if sigma_t.nrows() != eps.len() || !sigma_t.is_square() {
        return Err(Error::dim(eps.len(), sigma_t.nrows()));
    }
    let chol = Cholesky::new(sigma_t.clone()).ok_or_else(|| Error::DegenerateCovariance {
        min_eigenvalue: SymmetricEigen::new(sigma_t.clone()).eigenvalues.min().f64(),
    })?;
    Ok(whiten_with(&chol, eps))
}

fn whiten_with<T: Real>(chol: &Cholesky<T, nalgebra::Dyn>, eps: &DVector<T>) -> (DVector<T>, T) {
    let z = chol
        .l_dirty()
        .solve_lower_triangular(eps)
        .expect("positive diagonal");
    let norm = z.norm_squared();
    (z, norm)
}

/// Symmetric whitening `Σ^{-1/2} ε` via eigendecomposition.
pub fn whiten_symmetric<T: Real>(
    eps: &DVector<T>,
    sigma_t: &DMatrix<T>,
) -> Result<(DVector<T>, T)> {
    if sigma_t.nrows() != eps.len() || !sigma_t.is_square() {
        return Err(Error::dim(eps.len(), sigma_t.nrows()));
    }
    let eig = SymmetricEigen::new(sigma_t.clone());
    let min = eig.eigenvalues.min();
    if !(min > T::zero()) {
        return Err(Error::DegenerateCovariance {
            min_eigenvalue: min.f64(),
        });
    }
    let inv_sqrt = eig.eigenvalues.map(|l| T::one() / l.sqrt());
    let proj = eig.eigenvectors.tr_mul(eps).component_mul(&inv_sqrt);
    let z = &eig.eigenvectors * proj;
    let norm = z.norm_squared();
    Ok((z, norm))
}

/// Residuals, covariance, and whitened statistic for one trajectory.
pub fn residual_report<T: Real>(
    m: &GpModel<T>,
    q: &Trajectory<T>,
    noise: &NoiseSpec<T>,
) -> Result<ResidualReport<T>> {
    let eps = residuals(m, q)?;
    let asm = assemble(m, q, noise)?;
    let (whitened, mahalanobis_sq) = whiten_with(&asm.chol, &eps);
    Ok(ResidualReport {
        dof: eps.len(),
        eps,
        sigma_t: asm.sigma_t,
        whitened,
        mahalanobis_sq,
        jacobians: asm.jacobians,
        gp_variances: asm.gp_variances,
        jitter: asm.jitter,
    })
}

impl<T: Real> ResidualReport<T> {
    pub fn steps(&self) -> usize {
        self.jacobians.len()
    }

    /// Mean per-component variance of the noise-driven part of each diagonal block.
    pub fn noise_variances(&self) -> Vec<T> {
        let n = self.dof / self.steps().max(1);
        let nt = T::from_usize_lossy(n);
        (0..self.steps())
            .map(|k| {
                let tr = (0..n).fold(T::zero(), |a, i| a + self.sigma_t[(k * n + i, k * n + i)]);
                tr / nt - self.gp_variances[k] - self.jitter
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mat = |m: &DMatrix<T>| crate::gp::persist::MatrixDoc::from_matrix(m);
        let vec = |v: &DVector<T>| v.iter().map(|x| x.f64()).collect::<Vec<_>>();
        json!({
            "eps": vec(&self.eps),
            "sigma_t": mat(&self.sigma_t),
            "whitened": vec(&self.whitened),
            "mahalanobis_sq": self.mahalanobis_sq.f64(),
            "dof": self.dof,
            "jacobians": self.jacobians.iter().map(mat).collect::<Vec<_>>(),
            "gp_variances": self.gp_variances.iter().map(|v| v.f64()).collect::<Vec<_>>(),
            "jitter": self.jitter.f64(),
        })
    }
}
