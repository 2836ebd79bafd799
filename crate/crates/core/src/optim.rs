//! Derivative-free Nelder-Mead simplex minimisation.

use crate::Scalar;

#[derive(Debug, Clone)]
pub struct NelderMead<T> {
    /// Stop when `max f - min f` over the simplex falls below this.
    pub f_tol: T,
    pub max_iter: usize,
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
}

impl<T: Scalar> Default for NelderMead<T> {
    fn default() -> Self {
        Self {
            f_tol: T::lit(1e-6),
            max_iter: 2000,
            reflection: T::one(),
            expansion: T::lit(2.0),
            contraction: T::lit(0.5),
            shrink: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: Scalar> NelderMead<T> {
    /// Minimises `f` from `x0`; the initial simplex steps `steps[i]` along
    /// axis `i`. Non-finite objective values rank as `+inf`.
    pub fn minimize<F>(&self, mut f: F, x0: &[T], steps: &[T]) -> Minimum<T>
    where
        F: FnMut(&[T]) -> T,
    {
        assert_eq!(x0.len(), steps.len(), "one initial step per coordinate");
        let dim = x0.len();
        let mut evaluations = 0usize;
        let mut eval = |x: &[T]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..dim {
            let mut x = x0.to_vec();
            x[i] = x[i] + steps[i];
            let v = eval(&x);
            simplex.push((x, v));
        }

        let mut iterations = 0;
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let spread = simplex[dim].1 - simplex[0].1;
            if spread.is_finite() && spread < self.f_tol {
                converged = true;
                break;
            }
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;

            let mut centroid = vec![T::zero(); dim];
            for (x, _) in &simplex[..dim] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c = *c + *xi;
                }
            }
            let inv = T::count(dim).recip();
            centroid.iter_mut().for_each(|c| *c = *c * inv);

            let worst = simplex[dim].clone();
            let along = |t: T| -> Vec<T> { centroid.iter().zip(&worst.0).map(|(&c, &w)| c + t * (c - w)).collect() };

            let reflected = along(self.reflection);
            let f_reflected = eval(&reflected);
            if f_reflected < simplex[0].1 {
                let expanded = along(self.reflection * self.expansion);
                let f_expanded = eval(&expanded);
                simplex[dim] = if f_expanded < f_reflected { (expanded, f_expanded) } else { (reflected, f_reflected) };
                continue;
            }
            if f_reflected < simplex[dim - 1].1 {
                simplex[dim] = (reflected, f_reflected);
                continue;
            }
            // contraction: outside if the reflection improved on the worst point
            let (candidate, f_candidate) = if f_reflected < worst.1 {
                let x = along(self.reflection * self.contraction);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(-self.contraction);
                let v = eval(&x);
                (x, v)
            };
            if f_candidate < worst.1.min(f_reflected) {
                simplex[dim] = (candidate, f_candidate);
                continue;
            }
            let best = simplex[0].0.clone();
            for (x, v) in simplex.iter_mut().skip(1) {
                for (xi, bi) in x.iter_mut().zip(&best) {
                    *xi = *bi + self.shrink * (*xi - *bi);
                }
                *v = eval(x);
            }
        }

        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, iterations, evaluations, converged }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let nm = NelderMead::<f64> { f_tol: 1e-14, ..Default::default() };
        let r = nm.minimize(|x| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + 1.0, &[0.0, 0.0], &[0.5, 0.5]);
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-5 && (r.x[1] + 1.0).abs() < 1e-5);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock() {
        let nm = NelderMead::<f64> { f_tol: 1e-16, max_iter: 5000, ..Default::default() };
        let r = nm.minimize(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0], &[0.5, 0.5]);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn four_dimensions_single_precision() {
        let nm = NelderMead::<f32> { f_tol: 1e-7, ..Default::default() };
        let target = [4.0f32, 2.0, -0.1, 1.6];
        let r = nm.minimize(
            |x| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum(),
            &[0.0; 4],
            &[0.5, 0.5, 0.5, 0.25],
        );
        assert!(r.converged);
        for (a, b) in r.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-2);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let nm = NelderMead::<f64> { max_iter: 3, ..Default::default() };
        let r = nm.minimize(|x| x[0] * x[0] + x[1] * x[1], &[10.0, 10.0], &[1.0, 1.0]);
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn avoids_non_finite_regions() {
        let nm = NelderMead::<f64>::default();
        let r = nm.minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) + x[1] * x[1] },
            &[0.5, 0.5],
            &[1.0, 1.0],
        );
        assert!(r.converged);
        assert!(r.value.is_finite() && r.x[0] >= 0.0);
    }
}
