//! Gaussian-process regression of one-step state increments.
//!
//! One scalar squared-exponential kernel is shared by all output components;
//! the targets form an `M × n_x` matrix that is solved against the same
//! factorization column by column.

mod hyperopt;
pub mod persist;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernel::{
    gram_matrix, matrix_rows, KernelHyperparams, SquaredExponential, StationaryKernel,
};
use crate::scalar::Real;
use crate::types::RegressionData;

pub use hyperopt::{optimize_hyperparams, OptimizerSettings};

/// Relative jitter levels tried after a plain Cholesky attempt fails.
pub const KERNEL_JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor of `k`, adding `ε · mean(diag k)` for escalating `ε` from
/// `ladder` if the plain factorization fails. Returns the factor and the
/// absolute jitter added.
pub(crate) fn cholesky_with_jitter<T: Real>(
    k: &DMatrix<T>,
    ladder: &[f64],
) -> Option<(Cholesky<T, Dyn>, T)> {
    if let Some(c) = Cholesky::new(k.clone()) {
        return Some((c, T::zero()));
    }
    let n = k.nrows();
    let mean_diag = if n == 0 {
        T::one()
    } else {
        k.diagonal().sum() / T::from_usize_lossy(n)
    };
    for &eps in ladder {
        let jitter = T::c(eps) * mean_diag;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Some((c, jitter));
        }
    }
    None
}

pub(crate) fn condition_estimate<T: Real>(k: &DMatrix<T>) -> f64 {
    let eig = SymmetricEigen::new(k.clone()).eigenvalues;
    let (lo, hi) = (eig.min().f64(), eig.amax().f64());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn factor_kernel<T: Real>(
    rows: &[Vec<T>],
    kern: &SquaredExponential<T>,
) -> Result<(Cholesky<T, Dyn>, T)> {
    let k = gram_matrix(kern, rows);
    cholesky_with_jitter(&k, &KERNEL_JITTER_LADDER).ok_or_else(|| Error::IllConditionedKernel {
        condition: condition_estimate(&k),
        max_jitter: KERNEL_JITTER_LADDER[KERNEL_JITTER_LADDER.len() - 1],
    })
}

/// Trained regressor: training data, hyperparameters, cached factor and weights.
#[derive(Debug, Clone)]
pub struct GpModel<T: Real = f64> {
    x_train: DMatrix<T>,
    y_train: DMatrix<T>,
    x_rows: Vec<Vec<T>>,
    kernel: SquaredExponential<T>,
    chol: Cholesky<T, Dyn>,
    /// `K⁻¹ Y`, one column per output component.
    alpha: DMatrix<T>,
    jitter: T,
}

impl<T: Real> GpModel<T> {
    pub fn fit(reg: &RegressionData<T>, hyper: KernelHyperparams<T>) -> Result<Self> {
        hyper.validate()?;
        let kernel = SquaredExponential::new(hyper);
        let x_rows = matrix_rows(reg.inputs());
        let (chol, jitter) = factor_kernel(&x_rows, &kernel)?;
        let alpha = chol.solve(reg.targets());
        Ok(Self {
            x_train: reg.inputs().clone(),
            y_train: reg.targets().clone(),
            x_rows,
            kernel,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn hyper(&self) -> &KernelHyperparams<T> {
        &self.kernel.hyper
    }

    pub fn x_train(&self) -> &DMatrix<T> {
        &self.x_train
    }

    pub fn y_train(&self) -> &DMatrix<T> {
        &self.y_train
    }

    pub fn alpha(&self) -> &DMatrix<T> {
        &self.alpha
    }

    /// Lower-triangular `L` with `L Lᵀ = K + σ_n² I + jitter·I`.
    pub fn chol_factor(&self) -> DMatrix<T> {
        self.chol.l()
    }

    /// Absolute jitter that was added to the kernel diagonal during fitting.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim(self.dim(), x.len()));
        }
        Ok(())
    }

    fn cross_cov(&self, x: &[T]) -> DVector<T> {
        DVector::from_iterator(
            self.x_rows.len(),
            self.x_rows.iter().map(|xi| self.kernel.covariance(x, xi)),
        )
    }

    /// Predicted increment `k(x, X) K⁻¹ Y`.
    pub fn predict_mean(&self, x: &[T]) -> Result<DVector<T>> {
        self.check_dim(x)?;
        Ok(self.alpha.tr_mul(&self.cross_cov(x)))
    }

    /// Posterior covariance of the latent increment between `x1` and `x2`.
    pub fn posterior_cov(&self, x1: &[T], x2: &[T]) -> Result<T> {
        self.check_dim(x1)?;
        self.check_dim(x2)?;
        let prior = self.kernel.covariance(x1, x2);
        if self.n_train() == 0 {
            return Ok(prior);
        }
        let l = self.chol.l_dirty();
        let v1 = l
            .solve_lower_triangular(&self.cross_cov(x1))
            .expect("positive diagonal");
        let v = if x1 == x2 {
            return Ok((prior - v1.dot(&v1)).max(T::zero()));
        } else {
            let v2 = l
                .solve_lower_triangular(&self.cross_cov(x2))
                .expect("positive diagonal");
            v1.dot(&v2)
        };
        Ok(prior - v)
    }

    /// Posterior covariance matrix over a set of query points. The diagonal
    /// is clamped at zero.
    pub fn posterior_cov_matrix(&self, points: &[&[T]]) -> Result<DMatrix<T>> {
        for p in points {
            self.check_dim(p)?;
        }
        let n = points.len();
        let mut cov = DMatrix::from_fn(n, n, |i, j| self.kernel.covariance(points[i], points[j]));
        if self.n_train() > 0 {
            let kx = DMatrix::from_fn(self.n_train(), n, |i, j| {
                self.kernel.covariance(&self.x_rows[i], points[j])
            });
            let v = self
                .chol
                .l_dirty()
                .solve_lower_triangular(&kx)
                .expect("positive diagonal");
            cov -= v.tr_mul(&v);
        }
        for i in 0..n {
            cov[(i, i)] = cov[(i, i)].max(T::zero());
            for j in 0..i {
                let s = (cov[(i, j)] + cov[(j, i)]) * T::c(0.5);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok(cov)
    }

    /// `∂F̂_r/∂x_c` at `x`, rows indexed by output component.
    pub fn jacobian(&self, x: &[T]) -> Result<DMatrix<T>> {
        self.check_dim(x)?;
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        for (i, xi) in self.x_rows.iter().enumerate() {
            let g = self.kernel.gradient_x(x, xi);
            for r in 0..n {
                let a = self.alpha[(i, r)];
                for c in 0..n {
                    j[(r, c)] += a * g[c];
                }
            }
        }
        Ok(j)
    }

    /// Log marginal likelihood of the training data under the fitted factorization.
    pub fn log_marginal_likelihood(&self) -> T {
        lml_from_factor(&self.chol, &self.alpha, &self.y_train)
    }
}

fn lml_from_factor<T: Real>(chol: &Cholesky<T, Dyn>, alpha: &DMatrix<T>, y: &DMatrix<T>) -> T {
    let m = y.nrows();
    let n_out = T::from_usize_lossy(y.ncols());
    let data_fit = y.component_mul(alpha).sum();
    let log_det_half = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(T::zero(), |a, &d| a + d.ln());
    let half = T::c(0.5);
    -half * data_fit
        - n_out * log_det_half
        - n_out * half * T::from_usize_lossy(m) * T::two_pi().ln()
}

/// Sum over output columns of `−½ yᵀK⁻¹y − ½ log|K| − (M/2) log 2π`.
pub fn log_marginal_likelihood<T: Real>(
    reg: &RegressionData<T>,
    hyper: &KernelHyperparams<T>,
) -> Result<T> {
    hyper.validate()?;
    let kernel = SquaredExponential::new(*hyper);
    let rows = matrix_rows(reg.inputs());
    let (chol, _) = factor_kernel(&rows, &kernel)?;
    let alpha = chol.solve(reg.targets());
    Ok(lml_from_factor(&chol, &alpha, reg.targets()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_matrix, se_kernel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h(sf: f64, l: f64, sn: f64) -> KernelHyperparams {
        KernelHyperparams::new(sf, l, sn).unwrap()
    }

    fn random_data(rng: &mut ChaCha8Rng, m: usize, n_x: usize) -> RegressionData {
        let x = DMatrix::from_fn(m, n_x, |_, _| rng.random_range(-2.0..2.0));
        let y = DMatrix::from_fn(m, n_x, |_, _| rng.random_range(-1.0..1.0));
        RegressionData::new(x, y).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn single_pair_interpolates() {
        let reg = RegressionData::new(
            DMatrix::from_row_slice(1, 2, &[0.3, -0.4]),
            DMatrix::from_row_slice(1, 2, &[0.1, 0.25]),
        )
        .unwrap();
        let m = GpModel::fit(&reg, h(1.0, 0.7, 0.0)).unwrap();
        let p = m.predict_mean(&[0.3, -0.4]).unwrap();
        assert!((p[0] - 0.1).abs() < 1e-10 && (p[1] - 0.25).abs() < 1e-10);
        assert!(m.posterior_cov(&[0.3, -0.4], &[0.3, -0.4]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn duplicated_rows() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let y = DMatrix::from_row_slice(3, 1, &[0.1, 0.1, 0.3]);
        let reg = RegressionData::new(x, y).unwrap();
        match GpModel::fit(&reg, h(1.0, 1.0, 0.0)) {
            Ok(m) => assert!(m.jitter() > 0.0),
            Err(e) => assert!(matches!(e, Error::IllConditionedKernel { .. })),
        }
        let m = GpModel::fit(&reg, h(1.0, 1.0, 0.01)).unwrap();
        assert_eq!(m.jitter(), 0.0);
    }

    #[test]
    fn alpha_round_trip_against_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reg = random_data(&mut rng, 20, 2);
        let hp = h(1.1, 0.9, 0.01);
        let m = GpModel::fit(&reg, hp).unwrap();
        let k = kernel_matrix(reg.inputs(), reg.inputs(), &hp, true).unwrap();
        let back = &k * m.alpha();
        assert!((&back - reg.targets()).norm() / reg.targets().norm() < 1e-8);
        let dense = k.clone().lu().solve(reg.targets()).unwrap();
        assert!((&dense - m.alpha()).norm() / dense.norm() < 1e-8);
        let l = m.chol_factor();
        assert!(l.upper_triangle().iter().enumerate().all(|(idx, &v)| {
            let (i, j) = (idx % 20, idx / 20);
            i >= j || v == 0.0
        }));
        assert!(l.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn far_query_returns_prior_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = GpModel::fit(&random_data(&mut rng, 10, 2), h(1.0, 0.5, 0.01)).unwrap();
        let p = m.predict_mean(&[100.0, -100.0]).unwrap();
        assert!(p.amax() < 1e-10);
        assert!((m.posterior_cov(&[100.0, -100.0], &[100.0, -100.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_training_points_give_zero_at_origin() {
        let reg = RegressionData::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -1.0, -0.5]),
            DMatrix::from_row_slice(2, 2, &[0.3, -0.2, -0.3, 0.2]),
        )
        .unwrap();
        let m = GpModel::fit(&reg, h(1.0, 1.0, 0.05)).unwrap();
        assert!(m.predict_mean(&[0.0, 0.0]).unwrap().amax() < 1e-15);
    }

    #[test]
    fn noiseless_interpolation_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reg = random_data(&mut rng, 8, 2);
        let m = GpModel::fit(&reg, h(1.0, 0.6, 0.0)).unwrap();
        for i in 0..8 {
            let x: Vec<f64> = reg.inputs().row(i).iter().copied().collect();
            let p = m.predict_mean(&x).unwrap();
            assert!((p.transpose() - reg.targets().row(i)).amax() < 1e-10);
        }
    }

    #[test]
    fn empty_model_is_the_prior() {
        let m = GpModel::fit(&RegressionData::empty(2), h(1.5, 1.0, 0.0)).unwrap();
        let (a, b) = ([0.1, 0.2], [0.4, -0.3]);
        let prior = se_kernel(&a, &b, m.hyper(), false).unwrap();
        assert_eq!(m.posterior_cov(&a, &b).unwrap(), prior);
        assert_eq!(m.jacobian(&a).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(m.predict_mean(&a).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn posterior_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m_size in [3usize, 12, 30] {
            let reg = random_data(&mut rng, m_size, 2);
            let hp = h(1.3, 0.8, 0.02);
            let model = GpModel::fit(&reg, hp).unwrap();
            let kinv = kernel_matrix(reg.inputs(), reg.inputs(), &hp, true)
                .unwrap()
                .try_inverse()
                .unwrap();
            for _ in 0..10 {
                let a = DMatrix::from_fn(1, 2, |_, _| rng.random_range(-2.0..2.0));
                let b = DMatrix::from_fn(1, 2, |_, _| rng.random_range(-2.0..2.0));
                let ka = kernel_matrix(&a, reg.inputs(), &hp, false).unwrap();
                let kb = kernel_matrix(&b, reg.inputs(), &hp, false).unwrap();
                let kab = kernel_matrix(&a, &b, &hp, false).unwrap()[(0, 0)];
                let dense_cov = kab - (&ka * &kinv * kb.transpose())[(0, 0)];
                let dense_mean = &ka * &kinv * reg.targets();
                let (sa, sb) = (a.as_slice(), b.as_slice());
                let cov = model.posterior_cov(sa, sb).unwrap();
                assert!(
                    (cov - dense_cov).abs() <= 1e-8 * dense_cov.abs().max(1e-6),
                    "{cov} vs {dense_cov}"
                );
                let mean = model.predict_mean(sa).unwrap();
                assert!(
                    (mean.transpose() - &dense_mean).norm() <= 1e-8 * dense_mean.norm().max(1e-6)
                );
                assert!((cov - model.posterior_cov(sb, sa).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variance_bounded_by_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let reg = random_data(&mut rng, 25, 2);
        let m = GpModel::fit(&reg, h(1.4, 0.5, 0.0)).unwrap();
        for _ in 0..200 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let v = m.posterior_cov(&x, &x).unwrap();
            assert!((0.0..=1.4 * 1.4 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn cov_matrix_agrees_with_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let reg = random_data(&mut rng, 15, 2);
        let m = GpModel::fit(&reg, h(1.0, 0.7, 0.01)).unwrap();
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let cm = m.posterior_cov_matrix(&refs).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((cm[(i, j)] - m.posterior_cov(&pts[i], &pts[j]).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_special_cases() {
        let reg = RegressionData::new(
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, -2.0]),
        )
        .unwrap();
        let m = GpModel::fit(&reg, h(1.0, 1.0, 0.1)).unwrap();
        assert!(m.jacobian(&[0.5, 0.5]).unwrap().amax() == 0.0);
        assert!(m.jacobian(&[0.5]).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let reg = random_data(&mut rng, 15, 2);
        let m = GpModel::fit(&reg, h(1.2, 0.8, 0.01)).unwrap();
        let step = 1e-5;
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let j = m.jacobian(&x).unwrap();
            let mut fd = DMatrix::zeros(2, 2);
            for c in 0..2 {
                let (mut p, mut q) = (x, x);
                p[c] += step;
                q[c] -= step;
                let d = (m.predict_mean(&p).unwrap() - m.predict_mean(&q).unwrap()) / (2.0 * step);
                fd.set_column(c, &d);
            }
            assert!((&j - &fd).norm() / fd.norm().max(1e-3) < 1e-5);
        }
    }

    #[test]
    fn lml_closed_form_single_point() {
        let reg = RegressionData::new(
            DMatrix::from_element(1, 1, 0.2),
            DMatrix::from_element(1, 1, 0.7),
        )
        .unwrap();
        let hp = h(1.5, 1.0, 0.1);
        let s: f64 = 1.5 * 1.5 + 0.1;
        let expect = -0.5 * 0.49 / s - 0.5 * s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!(rel(log_marginal_likelihood(&reg, &hp).unwrap(), expect) < 1e-14);
        assert!(
            rel(
                GpModel::fit(&reg, hp).unwrap().log_marginal_likelihood(),
                expect
            ) < 1e-14
        );
    }

    #[test]
    fn lml_matches_dense_and_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let reg = random_data(&mut rng, 10, 2);
        let hp = h(0.9, 0.6, 0.03);
        let k = kernel_matrix(reg.inputs(), reg.inputs(), &hp, true).unwrap();
        let kinv = k.clone().try_inverse().unwrap();
        let det = k.determinant();
        let m = reg.len() as f64;
        let dense: f64 = (0..2)
            .map(|c| {
                let y = reg.targets().column(c);
                -0.5 * (y.transpose() * &kinv * y)[(0, 0)]
                    - 0.5 * det.ln()
                    - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
            })
            .sum();
        let lml = log_marginal_likelihood(&reg, &hp).unwrap();
        assert!(rel(lml, dense) < 1e-8);
        let perm = [3, 1, 9, 0, 2, 8, 4, 7, 5, 6];
        assert!(
            rel(
                log_marginal_likelihood(&reg.permuted(&perm), &hp).unwrap(),
                lml
            ) < 1e-12
        );
    }

    #[test]
    fn dimension_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = GpModel::fit(&random_data(&mut rng, 4, 2), h(1.0, 1.0, 0.01)).unwrap();
        assert!(m.predict_mean(&[1.0]).is_err());
        assert!(m.posterior_cov(&[1.0, 2.0], &[1.0]).is_err());
    }
}
