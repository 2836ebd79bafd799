//! Maximum-likelihood fitting of `(β, γ²)` to a single track.

use std::sync::Arc;
use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::field::CovariateField;
use crate::likelihood::{LikelihoodConfig, TrackLikelihood};
use crate::model::RsfModel;
use crate::optim::NelderMead;
use crate::simulator::Track;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Brownian-bridge importance sampling.
    Bbis,
    /// Single-step Euler-Maruyama.
    Em,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Bbis => "bbis",
            Method::Em => "em",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bbis" => Ok(Method::Bbis),
            "em" => Ok(Method::Em),
            other => Err(invalid(format!("unknown method {other:?} (expected bbis or em)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub beta_hat: Vec<T>,
    pub gamma_sq_hat: T,
    pub loglik: T,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds spent fitting.
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct FitOptions<T> {
    pub optimizer: NelderMead<T>,
    pub beta_step: T,
    pub log_gamma_sq_step: T,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self { optimizer: NelderMead::default(), beta_step: T::lit(0.5), log_gamma_sq_step: T::lit(0.25) }
    }
}

/// Zero coefficients and the moment estimate
/// `γ²₀ = mean_i |x_i - x_{i-1}|² / (2 Δt_i)`.
pub fn initial_params<T: Scalar>(track: &Track<T>, covariate_count: usize) -> (Vec<T>, T) {
    let two = T::lit(2.0);
    let sum = track.steps().fold(T::zero(), |acc, (a, b, dt)| acc + (b - a).norm_sq() / (two * dt));
    (vec![T::zero(); covariate_count], sum / T::count(track.intervals()))
}

pub fn fit<T: Scalar>(
    track: &Track<T>,
    fields: impl Into<Arc<[CovariateField<T>]>>,
    lik_config: &LikelihoodConfig<T>,
    method: Method,
) -> Result<FitResult<T>> {
    fit_with_options(track, fields, lik_config, method, &FitOptions::default())
}

/// Nelder-Mead over `(β₁, …, β_J, log γ²)` maximising the chosen
/// log-likelihood. One bridge ensemble is drawn up front and reused for
/// every objective evaluation.
pub fn fit_with_options<T: Scalar>(
    track: &Track<T>,
    fields: impl Into<Arc<[CovariateField<T>]>>,
    lik_config: &LikelihoodConfig<T>,
    method: Method,
    options: &FitOptions<T>,
) -> Result<FitResult<T>> {
    let started = Instant::now();
    let fields = fields.into();
    let j = fields.len();
    if j == 0 {
        return Err(invalid("at least one covariate is required"));
    }
    let config = match method {
        Method::Bbis => lik_config.clone(),
        Method::Em => LikelihoodConfig {
            include_initial_density: lik_config.include_initial_density,
            ..LikelihoodConfig::euler_maruyama()
        },
    };
    let likelihood = TrackLikelihood::new(track.clone(), config)?;
    let (beta0, gamma_sq0) = initial_params(track, j);
    let template = RsfModel::new(fields, beta0.clone(), gamma_sq0)?;

    let objective = |params: &[T]| -> T {
        let (beta, log_gamma_sq) = params.split_at(j);
        template
            .with_params(beta.to_vec(), log_gamma_sq[0].exp())
            .and_then(|m| likelihood.loglik(&m))
            .map(|ll| -ll)
            .unwrap_or_else(|_| T::infinity())
    };

    let mut x0 = beta0;
    x0.push(gamma_sq0.ln());
    if !objective(&x0).is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut steps = vec![options.beta_step; j];
    steps.push(options.log_gamma_sq_step);
    let min = options.optimizer.minimize(objective, &x0, &steps);

    let (beta, log_gamma_sq) = min.x.split_at(j);
    Ok(FitResult {
        beta_hat: beta.to_vec(),
        gamma_sq_hat: log_gamma_sq[0].exp(),
        loglik: -min.value,
        iterations: min.iterations,
        converged: min.converged && min.value.is_finite(),
        wall_time: started.elapsed().as_secs_f64(),
    })
}
