//! Brownian-bridge proposals for the importance sampler.
//!
//! An ensemble holds `M` standard (unit-variance, pinned at 0 on both ends)
//! 2-D bridges with `N` interior nodes spaced `h` apart. They are drawn once
//! from a seed and reused for every interval and every likelihood
//! evaluation; an interval `x_start -> x_end` turns bridge `j` into the
//! proposal path `μ_k + σ B_{j,k}` with `μ_k` the straight line between the
//! endpoints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::{Point2, Scalar};

/// Per-coordinate covariance of a bridge with variance parameter 1:
/// `Σ_{jk} = min(jh, kh) - jkh / (N + 1)`, `j, k = 1..=N`.
pub fn bridge_covariance<T: Scalar>(n: usize, h: T) -> Vec<Vec<T>> {
    let np1 = T::count(n + 1);
    (1..=n)
        .map(|j| {
            (1..=n)
                .map(|k| {
                    let (tj, tk) = (T::count(j) * h, T::count(k) * h);
                    tj.min(tk) - T::count(j * k) * h / np1
                })
                .collect()
        })
        .collect()
}

/// Conditional law of node `j` (1-based) of a standard bridge given node
/// `j - 1`: mean `prev * ratio`, variance `h * ratio`, where
/// `ratio = (N + 1 - j) / (N + 2 - j)` is `(T - t_j) / (T - t_{j-1})`.
#[inline]
fn conditional_ratio<T: Scalar>(n: usize, j: usize) -> T {
    T::count(n + 1 - j) / T::count(n + 2 - j)
}

/// Log-density of one standard bridge (`σ = 1`, sub-step `h`) evaluated at
/// its `N` interior nodes, both coordinates, by sequential conditioning.
pub fn standard_bridge_log_density<T: Scalar>(nodes: &[Point2<T>], h: T) -> T {
    let n = nodes.len();
    let ln_2pi = (T::lit(2.0) * T::PI()).ln();
    let half = T::lit(0.5);
    let mut prev = Point2::zero();
    let mut total = T::zero();
    for (idx, &b) in nodes.iter().enumerate() {
        let ratio: T = conditional_ratio(n, idx + 1);
        let var = h * ratio;
        let resid = b - prev.scale(ratio);
        // two independent coordinates with the same variance
        total = total - ln_2pi - var.ln() - half * resid.norm_sq() / var;
        prev = b;
    }
    total
}

/// `M` pre-simulated standard 2-D Brownian bridges with `N` interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeEnsemble<T> {
    m: usize,
    n: usize,
    h: T,
    seed: u64,
    /// Row-major `M × N`.
    offsets: Vec<Point2<T>>,
    /// Standard-bridge log-density of each row at sub-step `h`.
    log_q_standard: Vec<T>,
}

impl<T: Scalar> BridgeEnsemble<T> {
    pub fn bridge_count(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn substep(&self) -> T {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Interval length this geometry covers, `h * (N + 1)`.
    pub fn span(&self) -> T {
        self.h * T::count(self.n + 1)
    }

    pub fn bridge(&self, j: usize) -> &[Point2<T>] {
        &self.offsets[j * self.n..(j + 1) * self.n]
    }

    pub fn standard_log_density(&self, j: usize) -> T {
        self.log_q_standard[j]
    }

    /// Same bridges, same seed, but for sub-step `h`: Brownian scaling
    /// multiplies every offset by `sqrt(h / self.h)`.
    pub fn rescaled(&self, h: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(invalid(format!("sub-step must be positive, got {h}")));
        }
        let s = (h / self.h).sqrt();
        let shift = T::count(self.n) * (h / self.h).ln();
        Ok(Self {
            m: self.m,
            n: self.n,
            h,
            seed: self.seed,
            offsets: self.offsets.iter().map(|b| b.scale(s)).collect(),
            log_q_standard: self.log_q_standard.iter().map(|&lq| lq - shift).collect(),
        })
    }
}

/// Draws `m` independent standard bridges with `n` interior nodes each.
pub fn sample_ensemble<T: Scalar>(m: usize, n: usize, h: T, seed: u64) -> Result<BridgeEnsemble<T>> {
    if m == 0 {
        return Err(invalid("bridge count M must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("bridge node count N must be at least 1"));
    }
    if !(h > T::zero()) || !h.is_finite() {
        return Err(invalid(format!("sub-step must be positive, got {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = Vec::with_capacity(m * n);
    for _ in 0..m {
        let mut prev = Point2::zero();
        for j in 1..=n {
            let ratio: T = conditional_ratio(n, j);
            let sd = (h * ratio).sqrt();
            let z = Point2::new(T::std_normal(&mut rng), T::std_normal(&mut rng));
            prev = prev.scale(ratio) + z.scale(sd);
            offsets.push(prev);
        }
    }
    let log_q_standard = offsets.chunks(n).map(|b| standard_bridge_log_density(b, h)).collect();
    Ok(BridgeEnsemble { m, n, h, seed, offsets, log_q_standard })
}

/// Interior nodes of bridge `j` mapped onto `x_start -> x_end` with scale `gamma`.
pub fn scale_bridge<T: Scalar>(
    ensemble: &BridgeEnsemble<T>,
    j: usize,
    x_start: Point2<T>,
    x_end: Point2<T>,
    gamma: T,
) -> Result<Vec<Point2<T>>> {
    if j >= ensemble.m {
        return Err(invalid(format!("bridge index {j} out of range (M = {})", ensemble.m)));
    }
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(invalid(format!("bridge scale must be positive, got {gamma}")));
    }
    let n = ensemble.n;
    Ok(ensemble
        .bridge(j)
        .iter()
        .enumerate()
        .map(|(idx, b)| interpolation_node(x_start, x_end, idx + 1, n) + b.scale(gamma))
        .collect())
}

/// `μ_k = ((N + 1 - k) x_start + k x_end) / (N + 1)`.
#[inline]
pub(crate) fn interpolation_node<T: Scalar>(x_start: Point2<T>, x_end: Point2<T>, k: usize, n: usize) -> Point2<T> {
    let np1 = T::count(n + 1);
    (x_start.scale(T::count(n + 1 - k)) + x_end.scale(T::count(k))).scale(np1.recip())
}

/// Log-density of the scaled path of bridge `j` under the proposal
/// `N(μ, γ² Σ)` in both coordinates. The scaling is linear, so this is the
/// standard-bridge density minus `2N log γ`.
pub fn proposal_log_density<T: Scalar>(ensemble: &BridgeEnsemble<T>, j: usize, gamma: T) -> Result<T> {
    if j >= ensemble.m {
        return Err(invalid(format!("bridge index {j} out of range (M = {})", ensemble.m)));
    }
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(invalid(format!("bridge scale must be positive, got {gamma}")));
    }
    Ok(ensemble.log_q_standard[j] - T::count(2 * ensemble.n) * gamma.ln())
}
