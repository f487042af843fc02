//! Derivative-free minimization (Nelder–Mead simplex).

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadSettings<T: Real = f64> {
    pub max_iter: usize,
    /// Stop once the spread of objective values over the simplex drops below this.
    pub f_tol: T,
    /// Edge length of the initial simplex along each coordinate.
    pub initial_step: T,
}

#[derive(Debug, Clone)]
pub struct Minimum<T: Real = f64> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `x0`. Non-finite objective values are treated
/// as `+inf`, so infeasible points are never accepted over feasible ones.
pub fn nelder_mead<T: Real, F>(mut f: F, x0: &[T], s: &NelderMeadSettings<T>) -> Minimum<T>
where
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    let inf = T::max_value().unwrap_or_else(|| T::c(f64::MAX));
    let mut eval = |x: &[T]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            inf
        }
    };
    let (alpha, gamma, rho, sigma) = (T::one(), T::c(2.0), T::c(0.5), T::c(0.5));

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += s.initial_step;
        let v = eval(&p);
        simplex.push((p, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < s.max_iter {
        // stable sort keeps ties in insertion order so runs are reproducible
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if worst < inf && (worst - best).abs() <= s.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for (p, _) in &simplex[..n] {
            for (c, &v) in centroid.iter_mut().zip(p) {
                *c += v;
            }
        }
        let nt = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c /= nt);

        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(rho * alpha);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (p, v) in simplex.iter_mut().skip(1) {
                    for (pi, &bi) in p.iter_mut().zip(&x_best) {
                        *pi = bi + sigma * (*pi - bi);
                    }
                    *v = eval(p);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> NelderMeadSettings {
        NelderMeadSettings {
            max_iter: 2000,
            f_tol: 1e-14,
            initial_step: 0.5,
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &settings());
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| {
            if x[0] > 0.0 {
                f64::NAN
            } else {
                (x[0] + 3.0).powi(2)
            }
        };
        let m = nelder_mead(f, &[-0.1], &settings());
        assert!(m.value <= (2.9f64).powi(2));
        assert!((m.x[0] + 3.0).abs() < 1e-5);
    }
}
