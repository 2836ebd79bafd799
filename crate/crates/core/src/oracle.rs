//! Exact transition densities for the two tractable special cases of the
//! movement model.
//!
//! With every coefficient zero the process is Brownian motion with variance
//! `γ²` per unit time. With a single squared-distance covariate and
//! coefficient `β < 0`, the drift is `γ² β (x - c)` and the process is
//! Ornstein-Uhlenbeck with rate `θ = -γ² β`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bridges::sample_ensemble;
use crate::error::{invalid, Result};
use crate::field::quadratic_distance_field;
use crate::likelihood::{bbis_interval_logdensity, em_transition_logdensity};
use crate::model::RsfModel;
use crate::{Point2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams<T> {
    pub theta: T,
    pub center: Point2<T>,
    pub gamma_sq: T,
}

impl<T: Scalar> OuParams<T> {
    pub fn new(theta: T, center: Point2<T>, gamma_sq: T) -> Result<Self> {
        if !(theta > T::zero()) || !theta.is_finite() {
            return Err(invalid(format!("mean-reversion rate must be positive, got {theta}")));
        }
        if !(gamma_sq > T::zero()) || !gamma_sq.is_finite() {
            return Err(invalid(format!("gamma_sq must be positive, got {gamma_sq}")));
        }
        Ok(Self { theta, center, gamma_sq })
    }

    /// OU parameters of the squared-distance-only model with coefficient `beta`.
    pub fn from_quadratic_model(beta: T, center: Point2<T>, gamma_sq: T) -> Result<Self> {
        if !(beta < T::zero()) {
            return Err(invalid(format!("an OU reduction needs a negative coefficient, got {beta}")));
        }
        Self::new(-gamma_sq * beta, center, gamma_sq)
    }

    /// Per-coordinate stationary variance `γ² / (2θ)`.
    pub fn stationary_variance(&self) -> T {
        self.gamma_sq / (T::lit(2.0) * self.theta)
    }

    /// Mean and per-coordinate variance of `X(dt)` given `X(0) = y`.
    pub fn transition_moments(&self, y: Point2<T>, dt: T) -> (Point2<T>, T) {
        let decay = (-self.theta * dt).exp();
        let mean = self.center + (y - self.center).scale(decay);
        // 1 - e^{-2θdt} via exp_m1 keeps precision for small dt
        let var = -self.stationary_variance() * (-T::lit(2.0) * self.theta * dt).exp_m1();
        (mean, var)
    }
}

/// Log-density of an isotropic bivariate Gaussian.
pub fn isotropic_gaussian_logdensity<T: Scalar>(x: Point2<T>, mean: Point2<T>, var: T) -> T {
    -(T::lit(2.0) * T::PI() * var).ln() - (x - mean).norm_sq() / (T::lit(2.0) * var)
}

pub fn bm_transition_logdensity<T: Scalar>(gamma_sq: T, y: Point2<T>, x: Point2<T>, dt: T) -> Result<T> {
    if !(dt > T::zero()) {
        return Err(invalid(format!("interval length must be positive, got {dt}")));
    }
    Ok(isotropic_gaussian_logdensity(x, y, gamma_sq * dt))
}

pub fn ou_transition_logdensity<T: Scalar>(p: &OuParams<T>, y: Point2<T>, x: Point2<T>, dt: T) -> Result<T> {
    if !(dt > T::zero()) {
        return Err(invalid(format!("interval length must be positive, got {dt}")));
    }
    let (mean, var) = p.transition_moments(y, dt);
    Ok(isotropic_gaussian_logdensity(x, mean, var))
}

/// Which exactly solvable model an oracle comparison runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCase {
    /// All coefficients zero.
    Brownian,
    /// Squared distance to the origin only, with coefficient -0.1.
    OrnsteinUhlenbeck,
}

impl OracleCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            OracleCase::Brownian => "bm",
            OracleCase::OrnsteinUhlenbeck => "ou",
        }
    }

    /// The movement model of this case with `γ² = 5`.
    pub fn model<T: Scalar>(&self) -> RsfModel<T> {
        let beta = match self {
            OracleCase::Brownian => T::zero(),
            OracleCase::OrnsteinUhlenbeck => T::lit(-0.1),
        };
        RsfModel::new(vec![quadratic_distance_field(Point2::zero())], vec![beta], T::lit(5.0))
            .expect("oracle model parameters are valid")
    }

    /// Exact transition log-density under [`OracleCase::model`].
    pub fn exact_logdensity<T: Scalar>(&self, y: Point2<T>, x: Point2<T>, dt: T) -> Result<T> {
        let model = self.model::<T>();
        match self {
            OracleCase::Brownian => bm_transition_logdensity(model.gamma_sq(), y, x, dt),
            OracleCase::OrnsteinUhlenbeck => {
                let p = OuParams::from_quadratic_model(model.beta()[0], Point2::zero(), model.gamma_sq())?;
                ou_transition_logdensity(&p, y, x, dt)
            }
        }
    }

    /// `count` intervals of length `dt` drawn from the exact process: starts
    /// from the stationary law (OU) or uniform on `[-10, 10]²` (BM), ends
    /// from the exact transition.
    pub fn sample_intervals<T: Scalar>(&self, count: usize, dt: T, seed: u64) -> Result<Vec<(Point2<T>, Point2<T>)>> {
        if !(dt > T::zero()) {
            return Err(invalid(format!("interval length must be positive, got {dt}")));
        }
        let model = self.model::<T>();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |mean: Point2<T>, var: T| {
            let sd = var.sqrt();
            mean + Point2::new(T::std_normal(&mut rng), T::std_normal(&mut rng)).scale(sd)
        };
        let mut out = Vec::with_capacity(count);
        match self {
            OracleCase::Brownian => {
                let mut starts = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                for _ in 0..count {
                    let ten = T::lit(10.0);
                    let y = Point2::new(T::uniform(&mut starts, -ten, ten), T::uniform(&mut starts, -ten, ten));
                    out.push((y, normal(y, model.gamma_sq() * dt)));
                }
            }
            OracleCase::OrnsteinUhlenbeck => {
                let p = OuParams::from_quadratic_model(model.beta()[0], Point2::zero(), model.gamma_sq())?;
                for _ in 0..count {
                    let y = normal(Point2::zero(), p.stationary_variance());
                    let (mean, var) = p.transition_moments(y, dt);
                    out.push((y, normal(mean, var)));
                }
            }
        }
        Ok(out)
    }
}

/// One interval of an oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow<T> {
    pub x_prev: Point2<T>,
    pub x_next: Point2<T>,
    pub exact: T,
    pub bbis: T,
    pub em: T,
}

impl<T: Scalar> OracleRow<T> {
    pub fn bbis_error(&self) -> T {
        (self.bbis - self.exact).abs()
    }

    pub fn em_error(&self) -> T {
        (self.em - self.exact).abs()
    }
}

/// Exact, BBIS (`nodes` interior nodes, `bridges` bridges from `seed`) and
/// single-step Euler-Maruyama log-densities on the intervals.
pub fn oracle_comparison<T: Scalar>(
    case: OracleCase,
    intervals: &[(Point2<T>, Point2<T>)],
    dt: T,
    nodes: usize,
    bridges: usize,
    seed: u64,
) -> Result<Vec<OracleRow<T>>> {
    let model = case.model::<T>();
    let ensemble = sample_ensemble(bridges, nodes, dt / T::count(nodes + 1), seed)?;
    intervals
        .iter()
        .map(|&(y, x)| {
            Ok(OracleRow {
                x_prev: y,
                x_next: x,
                exact: case.exact_logdensity(y, x, dt)?,
                bbis: bbis_interval_logdensity(&model, y, x, dt, &ensemble)?,
                em: em_transition_logdensity(&model, y, x, dt)?,
            })
        })
        .collect()
}
