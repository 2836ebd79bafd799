//! Resource-selection model: `log π(x) = Σ_m β_m c_m(x)` up to a constant,
//! and the Langevin drift built from its gradient.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::field::{CovariateField, FieldKind, GridSpec};
use crate::{Point2, Scalar};

/// Anything that can supply `∇ log π(x)`.
pub trait LogRsfGradient<T: Scalar>: Sync {
    fn grad_log_rsf(&self, p: Point2<T>) -> Point2<T>;
}

/// Selection coefficients `beta` over a shared set of covariates, plus the
/// diffusion scale `gamma_sq` (map units² per unit time).
#[derive(Debug, Clone)]
pub struct RsfModel<T> {
    covariates: Arc<[CovariateField<T>]>,
    beta: Vec<T>,
    gamma_sq: T,
}

impl<T: Scalar> RsfModel<T> {
    pub fn new(covariates: impl Into<Arc<[CovariateField<T>]>>, beta: Vec<T>, gamma_sq: T) -> Result<Self> {
        let covariates = covariates.into();
        if beta.len() != covariates.len() {
            return Err(invalid(format!("{} coefficients for {} covariates", beta.len(), covariates.len())));
        }
        if !(gamma_sq > T::zero()) || !gamma_sq.is_finite() {
            return Err(invalid(format!("gamma_sq must be positive and finite, got {gamma_sq}")));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(invalid("selection coefficients must be finite"));
        }
        Ok(Self { covariates, beta, gamma_sq })
    }

    /// Same covariates, new parameters. Covariate storage is shared.
    pub fn with_params(&self, beta: Vec<T>, gamma_sq: T) -> Result<Self> {
        Self::new(Arc::clone(&self.covariates), beta, gamma_sq)
    }

    pub fn covariates(&self) -> &Arc<[CovariateField<T>]> {
        &self.covariates
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn gamma_sq(&self) -> T {
        self.gamma_sq
    }

    pub fn gamma(&self) -> T {
        self.gamma_sq.sqrt()
    }

    pub fn log_rsf_unnormalized(&self, p: Point2<T>) -> T {
        self.covariates.iter().zip(&self.beta).fold(T::zero(), |acc, (c, &b)| acc + b * c.value(p))
    }

    /// Collapses the weighted covariates into one gradient raster per grid
    /// plus a single linear term for the quadratic covariates.
    pub fn compile(&self) -> CompiledDrift<T> {
        CompiledDrift::new(self)
    }
}

impl<T: Scalar> LogRsfGradient<T> for RsfModel<T> {
    fn grad_log_rsf(&self, p: Point2<T>) -> Point2<T> {
        self.covariates.iter().zip(&self.beta).fold(Point2::zero(), |acc, (c, &b)| acc + c.gradient(p).scale(b))
    }
}

pub fn log_rsf_unnormalized<T: Scalar>(model: &RsfModel<T>, p: Point2<T>) -> T {
    model.log_rsf_unnormalized(p)
}

pub fn grad_log_rsf<T: Scalar>(model: &RsfModel<T>, p: Point2<T>) -> Point2<T> {
    model.grad_log_rsf(p)
}

/// `∇ log π` specialised for one parameter vector.
///
/// Bilinear interpolation is linear in the node values, so
/// `Σ β_m interp(∇c_m) = interp(Σ β_m ∇c_m)`: rasters on the same grid are
/// merged into a single gradient raster. Quadratic-distance covariates merge
/// into `slope * x + offset`.
#[derive(Debug, Clone)]
pub struct CompiledDrift<T> {
    rasters: Vec<GradientRaster<T>>,
    slope: T,
    offset: Point2<T>,
}

/// Weighted gradient nodes on one grid, with the lookup constants hoisted.
#[derive(Debug, Clone)]
struct GradientRaster<T> {
    grid: GridSpec<T>,
    inv_dx: T,
    inv_dy: T,
    max_fx: T,
    max_fy: T,
    nodes: Vec<Point2<T>>,
}

#[inline(always)]
fn clamp<T: Scalar>(f: T, hi: T) -> T {
    if f > hi {
        hi
    } else if f > T::zero() {
        f
    } else {
        T::zero()
    }
}

impl<T: Scalar> GradientRaster<T> {
    fn new(grid: GridSpec<T>, nodes: Vec<Point2<T>>) -> Self {
        Self {
            inv_dx: grid.dx().recip(),
            inv_dy: grid.dy().recip(),
            max_fx: T::count(grid.nx - 1),
            max_fy: T::count(grid.ny - 1),
            grid,
            nodes,
        }
    }

    #[inline(always)]
    fn interpolate(&self, p: Point2<T>) -> Point2<T> {
        let nx = self.grid.nx;
        let fx = clamp((p.x - self.grid.x_min) * self.inv_dx, self.max_fx);
        let fy = clamp((p.y - self.grid.y_min) * self.inv_dy, self.max_fy);
        let i = fx.to_index().min(nx - 2);
        let j = fy.to_index().min(self.grid.ny - 2);
        let tx = fx - T::count(i);
        let ty = fy - T::count(j);
        let k = j * nx + i;
        let (lower, upper) = (&self.nodes[k..k + 2], &self.nodes[k + nx..k + nx + 2]);
        let (a, b, c, d) = (lower[0], lower[1], upper[0], upper[1]);
        let one = T::one();
        let (ux, uy) = (one - tx, one - ty);
        let bottom = a.scale(ux) + b.scale(tx);
        let top = c.scale(ux) + d.scale(tx);
        bottom.scale(uy) + top.scale(ty)
    }
}

impl<T: Scalar> CompiledDrift<T> {
    fn new(model: &RsfModel<T>) -> Self {
        let two = T::lit(2.0);
        let mut rasters: Vec<(GridSpec<T>, Vec<Point2<T>>)> = Vec::new();
        let mut slope = T::zero();
        let mut offset = Point2::zero();
        for (field, &b) in model.covariates.iter().zip(&model.beta) {
            match &field.kind {
                FieldKind::QuadraticDistance { center } => {
                    slope = slope + two * b;
                    offset = offset - center.scale(two * b);
                }
                FieldKind::Raster(r) => {
                    let grads = r.gradients();
                    match rasters.iter_mut().find(|(g, _)| g == r.grid()) {
                        Some((_, acc)) => {
                            for (a, g) in acc.iter_mut().zip(grads) {
                                *a += g.scale(b);
                            }
                        }
                        None => rasters.push((*r.grid(), grads.iter().map(|g| g.scale(b)).collect())),
                    }
                }
            }
        }
        let rasters = rasters.into_iter().map(|(grid, nodes)| GradientRaster::new(grid, nodes)).collect();
        Self { rasters, slope, offset }
    }
}

impl<T: Scalar> LogRsfGradient<T> for CompiledDrift<T> {
    #[inline]
    fn grad_log_rsf(&self, p: Point2<T>) -> Point2<T> {
        let mut g = p.scale(self.slope) + self.offset;
        for raster in &self.rasters {
            g += raster.interpolate(p);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate_perlin_field, quadratic_distance_field};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic_only(beta3: f64) -> RsfModel<f64> {
        RsfModel::new(vec![quadratic_distance_field(Point2::new(0.0, 0.0))], vec![beta3], 5.0).unwrap()
    }

    fn three_covariates() -> RsfModel<f64> {
        let grid = GridSpec::square(100.0, 201).unwrap();
        RsfModel::new(
            vec![
                generate_perlin_field(1, 0.05, grid).unwrap(),
                generate_perlin_field(2, 0.05, grid).unwrap(),
                quadratic_distance_field(Point2::new(0.0, 0.0)),
            ],
            vec![4.0, 2.0, -0.1],
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn validates_parameters() {
        let covs = vec![quadratic_distance_field(Point2::new(0.0, 0.0))];
        assert!(RsfModel::new(covs.clone(), vec![1.0, 2.0], 5.0).is_err());
        assert!(RsfModel::new(covs.clone(), vec![1.0], 0.0).is_err());
        assert!(RsfModel::new(covs.clone(), vec![1.0], -1.0).is_err());
        assert!(RsfModel::new(covs, vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn zero_coefficients_give_flat_rsf() {
        let m = three_covariates().with_params(vec![0.0; 3], 5.0).unwrap();
        for p in [Point2::new(1.0, 2.0), Point2::new(-40.0, 33.0)] {
            assert_eq!(m.log_rsf_unnormalized(p), 0.0);
            assert_eq!(m.grad_log_rsf(p), Point2::zero());
        }
    }

    #[test]
    fn quadratic_only_values() {
        let m = quadratic_only(-0.1);
        assert_relative_eq!(m.log_rsf_unnormalized(Point2::new(3.0, 4.0)), -2.5, max_relative = 1e-15);
        assert_relative_eq!(m.grad_log_rsf(Point2::new(1.0, 0.0)).x, -0.2, max_relative = 1e-15);
        assert_eq!(m.grad_log_rsf(Point2::new(1.0, 0.0)).y, 0.0);
    }

    #[test]
    fn log_rsf_matches_hand_summation() {
        let m = three_covariates();
        let p = Point2::new(12.3, -4.56);
        let c = m.covariates();
        let hand = 4.0 * c[0].value(p) + 2.0 * c[1].value(p) - 0.1 * c[2].value(p);
        assert_eq!(m.log_rsf_unnormalized(p), hand);
    }

    #[test]
    fn gradient_is_linear_in_beta() {
        let m = three_covariates();
        let doubled = m.with_params(m.beta().iter().map(|b| b * 2.0).collect(), 5.0).unwrap();
        let p = Point2::new(-7.7, 21.4);
        assert_eq!(doubled.grad_log_rsf(p), m.grad_log_rsf(p).scale(2.0));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let m = quadratic_only(-0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let step = 1e-4;
        for _ in 0..100 {
            let p = Point2::new(rng.random_range(-90.0..90.0), rng.random_range(-90.0..90.0));
            let g = m.grad_log_rsf(p);
            let fd_x = (m.log_rsf_unnormalized(p + Point2::new(step, 0.0))
                - m.log_rsf_unnormalized(p - Point2::new(step, 0.0)))
                / (2.0 * step);
            let fd_y = (m.log_rsf_unnormalized(p + Point2::new(0.0, step))
                - m.log_rsf_unnormalized(p - Point2::new(0.0, step)))
                / (2.0 * step);
            assert_relative_eq!(g.x, fd_x, max_relative = 1e-5);
            assert_relative_eq!(g.y, fd_y, max_relative = 1e-5);
        }
    }

    #[test]
    fn compiled_drift_matches_per_covariate_sum() {
        let m = three_covariates();
        let compiled = m.compile();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            // include points outside the raster extent
            let p = Point2::new(rng.random_range(-120.0..120.0), rng.random_range(-120.0..120.0));
            let a = m.grad_log_rsf(p);
            let b = compiled.grad_log_rsf(p);
            assert!((a - b).norm_sq().sqrt() <= 1e-12 * (1.0 + a.norm_sq().sqrt()));
        }
    }

    #[test]
    fn compiled_drift_keeps_distinct_grids_apart() {
        let g1 = GridSpec::<f64>::square(100.0, 51).unwrap();
        let g2 = GridSpec::square(50.0, 101).unwrap();
        let m = RsfModel::new(
            vec![
                generate_perlin_field(1, 0.05, g1).unwrap(),
                generate_perlin_field(2, 0.05, g2).unwrap(),
                quadratic_distance_field(Point2::new(3.0, -1.0)),
                quadratic_distance_field(Point2::new(-2.0, 4.0)),
            ],
            vec![1.5, -0.7, -0.1, 0.05],
            2.0,
        )
        .unwrap();
        let compiled = m.compile();
        assert_eq!(compiled.rasters.len(), 2);
        for p in [Point2::new(0.0, 0.0), Point2::new(60.0, -10.0), Point2::new(-99.0, 99.0)] {
            let (a, b) = (m.grad_log_rsf(p), compiled.grad_log_rsf(p));
            assert!((a - b).norm_sq().sqrt() < 1e-12);
        }
    }
}
