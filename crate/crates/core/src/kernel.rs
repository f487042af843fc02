//! Squared-exponential covariance and its spatial gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Amplitude, isotropic length scale, and the noise variance added on
/// matching training indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelHyperparams<T: Real = f64> {
    pub sigma_f: T,
    pub length_scale: T,
    pub sigma_n_sq: T,
}

impl<T: Real> KernelHyperparams<T> {
    pub fn new(sigma_f: T, length_scale: T, sigma_n_sq: T) -> Result<Self> {
        let h = Self {
            sigma_f,
            length_scale,
            sigma_n_sq,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.sigma_f.is_finite()
            && self.length_scale.is_finite()
            && self.sigma_n_sq.is_finite();
        if !finite
            || self.sigma_f <= T::zero()
            || self.length_scale <= T::zero()
            || self.sigma_n_sq < T::zero()
        {
            return Err(Error::InvalidHyperparams(format!(
                "need sigma_f > 0, length_scale > 0, sigma_n_sq >= 0; got {}, {}, {}",
                self.sigma_f, self.length_scale, self.sigma_n_sq
            )));
        }
        Ok(())
    }
}

/// A stationary covariance function with an additive white-noise term on
/// the training diagonal.
pub trait StationaryKernel<T: Real>: Send + Sync {
    /// Smooth part of the covariance (no noise term).
    fn covariance(&self, x1: &[T], x2: &[T]) -> T;

    /// Gradient of [`covariance`](Self::covariance) with respect to `x`.
    fn gradient_x(&self, x: &[T], xi: &[T]) -> DVector<T>;

    /// Variance added where training indices coincide.
    fn noise_variance(&self) -> T;

    /// Prior variance `k(x, x)` of the smooth part.
    fn prior_variance(&self) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredExponential<T: Real = f64> {
    pub hyper: KernelHyperparams<T>,
}

impl<T: Real> SquaredExponential<T> {
    pub fn new(hyper: KernelHyperparams<T>) -> Self {
        Self { hyper }
    }
}

#[inline]
fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&p, &q)| {
        let d = p - q;
        acc + d * d
    })
}

impl<T: Real> StationaryKernel<T> for SquaredExponential<T> {
    #[inline]
    fn covariance(&self, x1: &[T], x2: &[T]) -> T {
        let h = &self.hyper;
        let l2 = h.length_scale * h.length_scale;
        h.sigma_f * h.sigma_f * (-sq_dist(x1, x2) / (l2 + l2)).exp()
    }

    fn gradient_x(&self, x: &[T], xi: &[T]) -> DVector<T> {
        let l2 = self.hyper.length_scale * self.hyper.length_scale;
        let k = self.covariance(x, xi);
        DVector::from_iterator(x.len(), x.iter().zip(xi).map(|(&a, &b)| -(a - b) / l2 * k))
    }

    fn noise_variance(&self) -> T {
        self.hyper.sigma_n_sq
    }

    fn prior_variance(&self) -> T {
        self.hyper.sigma_f * self.hyper.sigma_f
    }
}

/// `σ_f² exp(−‖x1−x2‖²/(2ℓ²))`, plus `σ_n²` when `same_index` is set.
///
/// `same_index` marks the two arguments as the same training sample; numeric
/// equality of the states alone never adds the noise term.
pub fn se_kernel<T: Real>(
    x1: &[T],
    x2: &[T],
    h: &KernelHyperparams<T>,
    same_index: bool,
) -> Result<T> {
    if x1.len() != x2.len() {
        return Err(Error::dim(x1.len(), x2.len()));
    }
    let k = SquaredExponential::new(*h).covariance(x1, x2);
    Ok(if same_index { k + h.sigma_n_sq } else { k })
}

/// `∇_x k(x, xi)`; the noise term contributes nothing.
pub fn kernel_gradient_x<T: Real>(
    x: &[T],
    xi: &[T],
    h: &KernelHyperparams<T>,
) -> Result<DVector<T>> {
    if x.len() != xi.len() {
        return Err(Error::dim(x.len(), xi.len()));
    }
    Ok(SquaredExponential::new(*h).gradient_x(x, xi))
}

pub(crate) fn matrix_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Covariance between every row of `a` and every row of `b`. With
/// `add_noise_diag` (only valid when `a` and `b` are the same matrix) the
/// noise variance lands on the diagonal.
pub fn kernel_matrix<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    h: &KernelHyperparams<T>,
    add_noise_diag: bool,
) -> Result<DMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::dim(a.ncols(), b.ncols()));
    }
    if add_noise_diag && a != b {
        return Err(Error::Usage(
            "noise diagonal requested for a cross-covariance between different point sets".into(),
        ));
    }
    let kern = SquaredExponential::new(*h);
    let ra = matrix_rows(a);
    if add_noise_diag {
        return Ok(gram_matrix(&kern, &ra));
    }
    let rb = matrix_rows(b);
    Ok(DMatrix::from_fn(ra.len(), rb.len(), |i, j| {
        kern.covariance(&ra[i], &rb[j])
    }))
}

/// Symmetric training covariance with the noise variance on the diagonal.
pub(crate) fn gram_matrix<T: Real, K: StationaryKernel<T>>(
    kern: &K,
    rows: &[Vec<T>],
) -> DMatrix<T> {
    let m = rows.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = kern.covariance(&rows[i], &rows[i]) + kern.noise_variance();
        for j in 0..i {
            let v = kern.covariance(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation2, SymmetricEigen, Vector2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h(sf: f64, l: f64, sn: f64) -> KernelHyperparams {
        KernelHyperparams::new(sf, l, sn).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let x = [0.4, -1.2];
        assert_eq!(se_kernel(&x, &x, &h(1.0, 1.0, 0.0), false).unwrap(), 1.0);
        let v = se_kernel(&x, &x, &h(2.0, 1.0, 0.01), true).unwrap();
        assert!((v - 4.01).abs() < 1e-15);
        let v = se_kernel(&[1.0, 1.0], &[0.0, 0.0], &h(1.0, 1.0, 0.5), false).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(se_kernel(&[1.0], &[1.0, 2.0], &h(1.0, 1.0, 0.0), false).is_err());
    }

    #[test]
    fn matrix_noise_diagonal() {
        let a = DMatrix::from_row_slice(1, 2, &[0.3, 0.1]);
        let hp = h(1.0, 1.0, 0.1);
        assert!((kernel_matrix(&a, &a, &hp, true).unwrap()[(0, 0)] - 1.1).abs() < 1e-15);
        assert_eq!(kernel_matrix(&a, &a, &hp, false).unwrap()[(0, 0)], 1.0);
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 0.1]);
        assert!(matches!(
            kernel_matrix(&a, &b, &hp, true),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn gram_is_symmetric_and_psd() {
        let a = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.5, -0.2, 1.5, 1.0]);
        let k = kernel_matrix(&a, &a, &h(1.3, 0.7, 0.0), true).unwrap();
        assert_eq!(k, k.transpose());
        let eig = SymmetricEigen::new(k).eigenvalues;
        assert!(eig.min() >= 0.0, "{eig}");
    }

    #[test]
    fn gradient_closed_form() {
        let g = kernel_gradient_x(&[1.0, 0.0], &[0.0, 0.0], &h(1.0, 1.0, 0.0)).unwrap();
        assert!((g[0] + (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        let g = kernel_gradient_x(&[0.2, 0.3], &[0.2, 0.3], &h(1.0, 1.0, 1.0)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let step = 1e-5;
        for _ in 0..100 {
            let hp = h(rng.random_range(0.5..2.0), rng.random_range(0.3..2.0), 0.0);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = kernel_gradient_x(&x, &xi, &hp).unwrap();
            let fd: Vec<f64> = (0..3)
                .map(|c| {
                    let (mut p, mut m) = (x.clone(), x.clone());
                    p[c] += step;
                    m[c] -= step;
                    (se_kernel(&p, &xi, &hp, false).unwrap()
                        - se_kernel(&m, &xi, &hp, false).unwrap())
                        / (2.0 * step)
                })
                .collect();
            let err: f64 = g
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = g.norm().max(1e-3);
            assert!(err / scale < 1e-6, "{err} vs {scale}");
        }
    }

    proptest! {
        #[test]
        fn gradient_antisymmetric(x in prop::collection::vec(-3.0f64..3.0, 2), xi in prop::collection::vec(-3.0f64..3.0, 2)) {
            let hp = h(1.2, 0.8, 0.0);
            let g1 = kernel_gradient_x(&x, &xi, &hp).unwrap();
            let g2 = kernel_gradient_x(&xi, &x, &hp).unwrap();
            prop_assert!((g1 + g2).amax() < 1e-15);
        }

        #[test]
        fn stationary_under_rotation(angle in 0.0f64..6.3, a in prop::array::uniform2(-3.0f64..3.0), b in prop::array::uniform2(-3.0f64..3.0)) {
            let hp = h(1.5, 0.9, 0.0);
            let r = Rotation2::new(angle);
            let ra = r * Vector2::new(a[0], a[1]);
            let rb = r * Vector2::new(b[0], b[1]);
            let k0 = se_kernel(&a, &b, &hp, false).unwrap();
            let k1 = se_kernel(ra.as_slice(), rb.as_slice(), &hp, false).unwrap();
            prop_assert!((k0 - k1).abs() < 1e-12);
        }
    }
}
