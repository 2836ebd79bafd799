//! Transition densities and track log-likelihoods.
//!
//! The Euler-Maruyama density treats one step `y -> x` of length `dt` as
//! `x ~ N(y + (γ² dt / 2) ∇log π(y), γ² dt I₂)`. The bridge importance
//! sampler splits an interval into `N + 1` sub-steps, integrates over the
//! `N` unobserved interior positions with Brownian-bridge proposals, and
//! averages the importance weights in log space.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bridges::{interpolation_node, sample_ensemble, BridgeEnsemble};
use crate::error::{invalid, Error, Result};
use crate::model::{LogRsfGradient, RsfModel};
use crate::numeric::{compensated_sum, log_mean_exp};
use crate::simulator::Track;
use crate::{Point2, Scalar};

/// How many interior nodes each interval gets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeSpec<T> {
    /// Same `N` for every interval. `Fixed(0)` is the plain Euler-Maruyama
    /// likelihood.
    Fixed(usize),
    /// `N_i = round(dt_i / h) - 1` (at least 1), so every sub-step stays
    /// close to `h`.
    TargetStep(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodConfig<T> {
    pub nodes: NodeSpec<T>,
    /// Number of bridges `M`.
    pub bridges: usize,
    /// Seed of the bridge ensemble(s).
    pub seed: u64,
    /// Add the unnormalised `log π(x₀)` term.
    pub include_initial_density: bool,
    /// Proposal scale `σ`; `None` uses `γ` of the model being evaluated.
    pub sigma: Option<T>,
}

impl<T: Scalar> LikelihoodConfig<T> {
    pub fn fixed(nodes: usize, bridges: usize, seed: u64) -> Self {
        Self { nodes: NodeSpec::Fixed(nodes), bridges, seed, include_initial_density: false, sigma: None }
    }

    pub fn target_step(h: T, bridges: usize, seed: u64) -> Self {
        Self { nodes: NodeSpec::TargetStep(h), bridges, seed, include_initial_density: false, sigma: None }
    }

    pub fn euler_maruyama() -> Self {
        Self::fixed(0, 1, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bridges == 0 {
            return Err(invalid("bridge count M must be at least 1"));
        }
        if let NodeSpec::TargetStep(h) = self.nodes {
            if !(h > T::zero()) || !h.is_finite() {
                return Err(invalid(format!("target sub-step must be positive, got {h}")));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(invalid(format!("proposal scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Interior node count used for an interval of length `dt`.
    pub fn nodes_for(&self, dt: T) -> usize {
        match self.nodes {
            NodeSpec::Fixed(n) => n,
            NodeSpec::TargetStep(h) => {
                let steps = (dt / h).round().to_usize().unwrap_or(0);
                steps.saturating_sub(1).max(1)
            }
        }
    }
}

/// Euler-Maruyama log-density of one step `y -> x` over `dt` under any drift.
#[inline]
pub fn em_step_logdensity<T: Scalar, D: LogRsfGradient<T> + ?Sized>(
    drift: &D,
    gamma_sq: T,
    y: Point2<T>,
    x: Point2<T>,
    dt: T,
) -> T {
    let var = gamma_sq * dt;
    let mean = y + drift.grad_log_rsf(y).scale(var / T::lit(2.0));
    -(T::lit(2.0) * T::PI() * var).ln() - (x - mean).norm_sq() / (T::lit(2.0) * var)
}

pub fn em_transition_logdensity<T: Scalar>(model: &RsfModel<T>, y: Point2<T>, x: Point2<T>, dt: T) -> Result<T> {
    check_dt(dt)?;
    Ok(em_step_logdensity(model, model.gamma_sq(), y, x, dt))
}

fn check_dt<T: Scalar>(dt: T) -> Result<()> {
    if dt > T::zero() && dt.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("interval length must be positive, got {dt}")))
    }
}

/// Importance-sampling estimate of `log p(x_next | x_prev, dt)`.
///
/// The ensemble is used at sub-step `dt / (N + 1)`; when that differs from
/// the ensemble's own `h` the offsets are rescaled by Brownian scaling.
/// `weights` is scratch space of length `M`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn bridge_interval_logdensity<T: Scalar, D: LogRsfGradient<T> + ?Sized>(
    drift: &D,
    gamma_sq: T,
    sigma: T,
    x_prev: Point2<T>,
    x_next: Point2<T>,
    dt: T,
    ensemble: &BridgeEnsemble<T>,
    means: &mut Vec<Point2<T>>,
    weights: &mut Vec<T>,
) -> T {
    let n = ensemble.node_count();
    let np1 = T::count(n + 1);
    let h = dt / np1;
    let ratio = h / ensemble.substep();
    let offset_scale = sigma * ratio.sqrt();
    let two = T::lit(2.0);

    let var = gamma_sq * h;
    let half_var = var / two;
    let inv_two_var = (two * var).recip();
    // Σ of N + 1 Gaussian normalisers, minus the proposal's Jacobian terms
    // (standard density at sub-step h, then scaled by σ).
    let normaliser = -np1 * (two * T::PI() * var).ln();
    let log_q_shift = -T::count(n) * ratio.ln() - T::count(2 * n) * sigma.ln();

    means.clear();
    means.extend((1..=n).map(|k| interpolation_node(x_prev, x_next, k, n)));
    let start_mean = x_prev + drift.grad_log_rsf(x_prev).scale(half_var);

    weights.clear();
    for j in 0..ensemble.bridge_count() {
        let mut mean = start_mean;
        let mut sq = T::zero();
        for (mu, b) in means.iter().zip(ensemble.bridge(j)) {
            let node = *mu + b.scale(offset_scale);
            sq = sq + (node - mean).norm_sq();
            mean = node + drift.grad_log_rsf(node).scale(half_var);
        }
        sq = sq + (x_next - mean).norm_sq();
        let log_q = ensemble.standard_log_density(j) + log_q_shift;
        weights.push(normaliser - sq * inv_two_var - log_q);
    }
    log_mean_exp(weights)
}

/// Bridge importance-sampling log-density of one interval with the
/// proposal scale `σ = γ`. `dt` must equal the ensemble's `h * (N + 1)`.
pub fn bbis_interval_logdensity<T: Scalar>(
    model: &RsfModel<T>,
    x_prev: Point2<T>,
    x_next: Point2<T>,
    dt: T,
    ensemble: &BridgeEnsemble<T>,
) -> Result<T> {
    check_dt(dt)?;
    let span = ensemble.span();
    if ((dt - span) / span).abs() > T::lit(1e-12) {
        return Err(Error::GeometryMismatch { dt: dt.to_f64_lossy(), expected: span.to_f64_lossy() });
    }
    let drift = model.compile();
    let value = bridge_interval_logdensity(
        &drift,
        model.gamma_sq(),
        model.gamma(),
        x_prev,
        x_next,
        dt,
        ensemble,
        &mut Vec::new(),
        &mut Vec::new(),
    );
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteInterval { index: 0 })
    }
}

/// A track prepared for repeated likelihood evaluation: node counts are
/// assigned per interval and one bridge ensemble is drawn per distinct node
/// count, then reused for every evaluation (common random numbers).
#[derive(Debug, Clone)]
pub struct TrackLikelihood<T> {
    track: Track<T>,
    config: LikelihoodConfig<T>,
    /// Index into `ensembles` per interval; `None` means an Euler-Maruyama step.
    plan: Vec<Option<usize>>,
    ensembles: Vec<BridgeEnsemble<T>>,
}

impl<T: Scalar> TrackLikelihood<T> {
    pub fn new(track: Track<T>, config: LikelihoodConfig<T>) -> Result<Self> {
        config.validate()?;
        let mut by_nodes: BTreeMap<usize, usize> = BTreeMap::new();
        let mut ensembles = Vec::new();
        let mut plan = Vec::with_capacity(track.intervals());
        for (_, _, dt) in track.steps() {
            let n = config.nodes_for(dt);
            if n == 0 {
                plan.push(None);
                continue;
            }
            let slot = match by_nodes.get(&n) {
                Some(&slot) => slot,
                None => {
                    let h = match config.nodes {
                        NodeSpec::TargetStep(h) => h,
                        NodeSpec::Fixed(_) => dt / T::count(n + 1),
                    };
                    ensembles.push(sample_ensemble(config.bridges, n, h, config.seed)?);
                    by_nodes.insert(n, ensembles.len() - 1);
                    ensembles.len() - 1
                }
            };
            plan.push(Some(slot));
        }
        Ok(Self { track, config, plan, ensembles })
    }

    pub fn track(&self) -> &Track<T> {
        &self.track
    }

    pub fn config(&self) -> &LikelihoodConfig<T> {
        &self.config
    }

    pub fn ensembles(&self) -> &[BridgeEnsemble<T>] {
        &self.ensembles
    }

    /// Per-interval log-densities, in track order.
    pub fn interval_terms(&self, model: &RsfModel<T>) -> Result<Vec<T>> {
        let drift = model.compile();
        let gamma_sq = model.gamma_sq();
        let sigma = self.config.sigma.unwrap_or_else(|| model.gamma());
        let steps: Vec<_> = self.track.steps().zip(&self.plan).collect();
        let terms: Vec<T> = steps
            .par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(means, weights), &((x_prev, x_next, dt), slot)| match slot {
                    None => em_step_logdensity(&drift, gamma_sq, x_prev, x_next, dt),
                    Some(k) => bridge_interval_logdensity(
                        &drift,
                        gamma_sq,
                        sigma,
                        x_prev,
                        x_next,
                        dt,
                        &self.ensembles[*k],
                        means,
                        weights,
                    ),
                },
            )
            .collect();
        if let Some(index) = terms.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInterval { index });
        }
        Ok(terms)
    }

    pub fn loglik(&self, model: &RsfModel<T>) -> Result<T> {
        let terms = self.interval_terms(model)?;
        let mut total = compensated_sum(terms);
        if self.config.include_initial_density {
            total = total + model.log_rsf_unnormalized(self.track.points()[0]);
        }
        Ok(total)
    }
}

/// Sum of interval log-densities (the initial-position term only when
/// `config.include_initial_density` is set).
pub fn bbis_track_loglik<T: Scalar>(model: &RsfModel<T>, track: &Track<T>, config: &LikelihoodConfig<T>) -> Result<T> {
    TrackLikelihood::new(track.clone(), config.clone())?.loglik(model)
}

/// Euler-Maruyama log-likelihood of a track, conditional on its first position.
pub fn em_track_loglik<T: Scalar>(model: &RsfModel<T>, track: &Track<T>) -> T {
    let drift = model.compile();
    compensated_sum(track.steps().map(|(y, x, dt)| em_step_logdensity(&drift, model.gamma_sq(), y, x, dt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::quadratic_distance_field;
    use approx::assert_relative_eq;

    fn model(beta3: f64) -> RsfModel<f64> {
        RsfModel::new(vec![quadratic_distance_field(Point2::new(0.0, 0.0))], vec![beta3], 5.0).unwrap()
    }

    #[test]
    fn em_density_at_the_mean() {
        let m = model(0.0);
        // γ² dt = 1
        let at_mean = em_transition_logdensity(&m, Point2::new(1.0, 1.0), Point2::new(1.0, 1.0), 0.2).unwrap();
        assert_relative_eq!(at_mean, -(2.0 * std::f64::consts::PI).ln(), max_relative = 1e-14);
        assert_relative_eq!(at_mean, -1.837877066409345, max_relative = 1e-14);
        let off = em_transition_logdensity(&m, Point2::new(1.0, 1.0), Point2::new(2.0, 1.0), 0.2).unwrap();
        assert_relative_eq!(off, -2.337877066409345, max_relative = 1e-14);
        assert!(em_transition_logdensity(&m, Point2::zero(), Point2::zero(), 0.0).is_err());
    }

    #[test]
    fn em_mean_follows_the_analytic_drift() {
        let m = model(-0.1);
        let dt = 0.3;
        for k in 0..10 {
            let y = Point2::new(k as f64 - 4.5, 2.0 * k as f64 - 7.0);
            // mean y + γ² dt β₃ (y - c); density is maximal there
            let mean = y + y.scale(5.0 * dt * -0.1);
            let peak = em_transition_logdensity(&m, y, mean, dt).unwrap();
            assert_relative_eq!(peak, -(2.0 * std::f64::consts::PI * 5.0 * dt).ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn node_counts_from_target_step() {
        let c = LikelihoodConfig::target_step(0.01, 10, 0);
        assert_eq!(c.nodes_for(1.0), 99);
        assert_eq!(c.nodes_for(0.05), 4);
        assert_eq!(c.nodes_for(0.2), 19);
        assert_eq!(c.nodes_for(0.004), 1);
        assert_eq!(LikelihoodConfig::<f64>::fixed(7, 1, 0).nodes_for(123.0), 7);
    }

    #[test]
    fn config_validation() {
        assert!(LikelihoodConfig::<f64>::fixed(3, 0, 0).validate().is_err());
        assert!(LikelihoodConfig::target_step(0.0, 3, 0).validate().is_err());
        let mut c = LikelihoodConfig::<f64>::fixed(3, 3, 0);
        c.sigma = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn geometry_mismatch_is_reported() {
        let m = model(-0.1);
        let ens = sample_ensemble(4, 9, 0.1, 1).unwrap();
        assert!(bbis_interval_logdensity(&m, Point2::zero(), Point2::new(1.0, 0.0), 1.0, &ens).is_ok());
        assert!(matches!(
            bbis_interval_logdensity(&m, Point2::zero(), Point2::new(1.0, 0.0), 1.1, &ens),
            Err(Error::GeometryMismatch { .. })
        ));
    }

    #[test]
    fn initial_density_flag_adds_the_unnormalised_term() {
        let m = model(-0.1);
        let track = Track::new(vec![0.0, 1.0, 2.0], vec![Point2::new(3.0, 4.0), Point2::new(2.0, 2.0), Point2::zero()])
            .unwrap();
        let mut config = LikelihoodConfig::fixed(4, 8, 3);
        let without = bbis_track_loglik(&m, &track, &config).unwrap();
        config.include_initial_density = true;
        let with = bbis_track_loglik(&m, &track, &config).unwrap();
        assert_relative_eq!(with - without, -2.5, max_relative = 1e-12);
    }

    #[test]
    fn ensembles_are_shared_per_node_count() {
        let track = Track::new(
            vec![0.0, 1.0, 2.0, 2.5, 3.5],
            vec![Point2::zero(), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0), Point2::zero()],
        )
        .unwrap();
        let lik = TrackLikelihood::new(track, LikelihoodConfig::target_step(0.1, 5, 1)).unwrap();
        let counts: Vec<usize> = lik.ensembles().iter().map(|e| e.node_count()).collect();
        assert_eq!(counts, vec![9, 4]);
    }
}
