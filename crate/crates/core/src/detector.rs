//! Chi-squared tail probability and the nominal/anomalous decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::residual::{residual_report, ResidualReport};
use crate::scalar::Real;
use crate::types::{NoiseSpec, Trajectory};

pub const DEFAULT_P_THRESHOLD: f64 = 0.05;

const MAX_ITER: usize = 100_000;

/// Lanczos approximation (g = 7, 9 terms) of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    #[allow(clippy::excessive_precision)]
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < T::c(0.5) {
        // reflection
        let pi = T::pi();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::c(COEF[0]);
    let t = x + T::c(7.5);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += T::c(c) / (x + T::from_usize_lossy(i));
    }
    T::c(0.5) * T::two_pi().ln() + (x + T::c(0.5)) * t.ln() - t + a.ln()
}

/// `exp(a ln x − x − ln Γ(a))`
fn gamma_prefactor<T: Real>(a: T, x: T) -> T {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

/// Lower regularized incomplete gamma `P(a, x)` by its power series.
fn gamma_p_series<T: Real>(a: T, x: T) -> T {
    let eps = T::default_epsilon();
    let mut ap = a;
    let mut del = T::one() / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += T::one();
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * eps {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

/// Upper regularized incomplete gamma `Q(a, x)` by modified Lentz continued fraction.
fn gamma_q_continued_fraction<T: Real>(a: T, x: T) -> T {
    let eps = T::default_epsilon();
    let tiny = T::c(f32::MIN_POSITIVE as f64);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let i = T::from_usize_lossy(i);
        let an = -i * (i - a);
        b += T::c(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let del = d * c;
        h *= del;
        if (del - T::one()).abs() < eps {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Upper regularized incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q<T: Real>(a: T, x: T) -> Result<T> {
    if !(a > T::zero()) || !(x >= T::zero()) {
        return Err(Error::Domain(format!(
            "gamma_q requires a > 0 and x >= 0, got a={a}, x={x}"
        )));
    }
    if x == T::zero() {
        return Ok(T::one());
    }
    if !x.is_finite() {
        return Ok(T::zero());
    }
    let q = if x < a + T::one() {
        T::one() - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    };
    Ok(q.max(T::zero()).min(T::one()))
}

/// `P(X > q)` for `X ~ χ²` with `dof` degrees of freedom.
pub fn chi2_sf<T: Real>(q: T, dof: usize) -> Result<T> {
    if dof == 0 {
        return Err(Error::Domain(
            "chi-squared needs at least one degree of freedom".into(),
        ));
    }
    if !(q >= T::zero()) {
        return Err(Error::Domain(format!(
            "chi-squared statistic must be non-negative, got {q}"
        )));
    }
    let half = T::c(0.5);
    gamma_q(T::from_usize_lossy(dof) * half, q * half)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Nominal,
    Anomalous,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Nominal => "nominal",
            Verdict::Anomalous => "anomalous",
        })
    }
}

/// Anomalous iff `p < p_thr`; a p-value equal to the threshold is nominal.
pub fn classify<T: Real>(p: T, p_thr: T) -> Result<Verdict> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain(format!(
            "p-value must lie in [0, 1], got {p}"
        )));
    }
    if !(p_thr > T::zero() && p_thr < T::one()) {
        return Err(Error::Domain(format!(
            "threshold must lie in (0, 1), got {p_thr}"
        )));
    }
    Ok(if p < p_thr {
        Verdict::Anomalous
    } else {
        Verdict::Nominal
    })
}

#[derive(Debug, Clone)]
pub struct DetectionResult<T: Real = f64> {
    pub p_value: T,
    pub p_thr: T,
    pub dof: usize,
    pub mahalanobis_sq: T,
    pub verdict: Verdict,
    pub steps_used: usize,
    pub report: ResidualReport<T>,
}

/// Serializable summary of a [`DetectionResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub p_value: f64,
    pub p_thr: f64,
    pub dof: usize,
    pub mahalanobis_sq: f64,
    pub verdict: Verdict,
    pub steps_used: usize,
}

impl<T: Real> DetectionResult<T> {
    pub fn record(&self) -> DetectionRecord {
        DetectionRecord {
            p_value: self.p_value.f64(),
            p_thr: self.p_thr.f64(),
            dof: self.dof,
            mahalanobis_sq: self.mahalanobis_sq.f64(),
            verdict: self.verdict,
            steps_used: self.steps_used,
        }
    }
}

/// Score a query trajectory against a trained model. With `max_steps = Some(s)`
/// only the first `s` transitions are analyzed.
pub fn score_trajectory<T: Real>(
    m: &GpModel<T>,
    q: &Trajectory<T>,
    noise: &NoiseSpec<T>,
    p_thr: T,
    max_steps: Option<usize>,
) -> Result<DetectionResult<T>> {
    let q = match max_steps {
        Some(s) => q.truncated(s)?,
        None => q.clone(),
    };
    let report = residual_report(m, &q, noise)?;
    let p_value = chi2_sf(report.mahalanobis_sq, report.dof)?;
    let verdict = classify(p_value, p_thr)?;
    Ok(DetectionResult {
        p_value,
        p_thr,
        dof: report.dof,
        mahalanobis_sq: report.mahalanobis_sq,
        verdict,
        steps_used: q.transitions(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature, used as an independent oracle.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(
            f,
            a,
            b,
            fa,
            fm,
            fb,
            (b - a) / 6.0 * (fa + 4.0 * fm + fb),
            tol,
            50,
        )
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0f64).abs() < 1e-14);
        assert!(ln_gamma(2.0f64).abs() < 1e-14);
        assert!((ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0f64) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sf_at_zero_is_one() {
        for k in [1usize, 2, 3, 10, 1000] {
            assert_eq!(chi2_sf(0.0f64, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn dof_two_closed_form() {
        let q = 2.0 * 4f64.ln();
        assert!((chi2_sf(q, 2).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn dof_one_against_quadrature() {
        let density = |x: f64| (-x / 2.0).exp() / (2.0 * std::f64::consts::PI * x).sqrt();
        let oracle = adaptive_simpson(&density, 1.0, 80.0, 1e-13);
        let v = chi2_sf(1.0f64, 1).unwrap();
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
        assert!((v - 0.3173105).abs() < 1e-7);
    }

    #[test]
    fn large_dof_against_reference() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for &dof in &[1usize, 7, 40, 401, 2500, 10_000] {
            let dist = ChiSquared::new(dof as f64).unwrap();
            for frac in [0.2, 0.8, 0.95, 1.0, 1.05, 1.3, 3.0] {
                let q = dof as f64 * frac;
                let v = chi2_sf(q, dof).unwrap();
                let r = dist.sf(q);
                assert!((v - r).abs() < 1e-10, "dof {dof} q {q}: {v} vs {r}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(chi2_sf(-1.0f64, 2).is_err());
        assert!(chi2_sf(1.0f64, 0).is_err());
        assert!(chi2_sf(f64::NAN, 2).is_err());
        assert!(classify(1.2f64, 0.05).is_err());
        assert!(classify(0.5f64, 0.0).is_err());
        assert!(classify(0.5f64, 1.0).is_err());
    }

    #[test]
    fn classify_cases() {
        assert_eq!(classify(0.01f64, 0.05).unwrap(), Verdict::Anomalous);
        assert_eq!(classify(0.05f64, 0.05).unwrap(), Verdict::Nominal);
        assert_eq!(classify(1.0f64, 0.999).unwrap(), Verdict::Nominal);
    }

    #[test]
    fn works_in_single_precision() {
        let v = chi2_sf(2.0f32 * 4f32.ln(), 2).unwrap();
        assert!((v - 0.25).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn even_dof_poisson_sum(k in 1usize..=20, q in 0.0f64..120.0) {
            let half = q / 2.0;
            let mut term = 1.0;
            let mut sum = 1.0;
            for i in 1..k {
                term *= half / i as f64;
                sum += term;
            }
            let closed = (-half).exp() * sum;
            prop_assert!((chi2_sf(q, 2 * k).unwrap() - closed).abs() < 1e-10);
        }

        #[test]
        fn decreasing_in_q(dof in 1usize..200, q in 0.0f64..400.0, dq in 1e-3f64..10.0) {
            let a = chi2_sf(q, dof).unwrap();
            let b = chi2_sf(q + dq, dof).unwrap();
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(b <= a);
            if a > 1e-250 && a < 1.0 - 1e-12 {
                prop_assert!(b < a);
            }
        }

        #[test]
        fn classify_monotone(p in 0.0f64..=1.0, lower in 0.0f64..=1.0, thr in 0.001f64..0.999) {
            let lowered = p * lower;
            if classify(p, thr).unwrap() == Verdict::Anomalous {
                prop_assert_eq!(classify(lowered, thr).unwrap(), Verdict::Anomalous);
            }
        }
    }
}
