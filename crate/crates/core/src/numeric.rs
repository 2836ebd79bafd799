//! Small numerical helpers: log-sum-exp and compensated summation.

use crate::Scalar;

/// `log Σ exp(x_i)`, shifted by the maximum so nothing underflows.
/// Empty input gives `-inf`.
pub fn logsumexp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        // all -inf, or a +inf / NaN that should propagate as is
        return if xs.iter().any(|x| x.is_nan()) { T::nan() } else { max };
    }
    let sum = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

/// `log((1/n) Σ exp(x_i))`.
pub fn log_mean_exp<T: Scalar>(xs: &[T]) -> T {
    logsumexp(xs) - T::count(xs.len()).ln()
}

/// Neumaier-compensated sum.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(xs: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
