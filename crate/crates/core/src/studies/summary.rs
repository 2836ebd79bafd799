use std::io::Write;

use super::runner::StudyResult;
use crate::error::{invalid, Result};

/// Type-7 sample quantile (linear interpolation between order statistics)
/// of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub mean: f64,
    /// Sample variance with the `n - 1` denominator; 0 for a single value.
    pub variance: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = if n == 0 { f64::NAN } else { sorted.iter().sum::<f64>() / n as f64 };
        let variance = match n {
            0 => f64::NAN,
            1 => 0.0,
            _ => sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64,
        };
        Self {
            count: n,
            median: quantile_sorted(&sorted, 0.5),
            q25: quantile_sorted(&sorted, 0.25),
            q75: quantile_sorted(&sorted, 0.75),
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub parameter: String,
    pub truth: f64,
    pub stats: Moments,
}

impl SummaryRow {
    pub fn bias(&self) -> f64 {
        self.stats.mean - self.truth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub sweep_name: &'static str,
    pub rows: Vec<SummaryRow>,
    /// Failed or non-converged fits per sweep value.
    pub failures: Vec<(f64, usize)>,
}

impl Summary {
    pub fn get(&self, sweep_value: f64, parameter: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.sweep_value == sweep_value && r.parameter == parameter)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},parameter,n,median,q25,q75,mean,bias,variance", self.sweep_name)?;
        for r in &self.rows {
            let s = &r.stats;
            writeln!(
                out,
                "{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                r.sweep_value,
                r.parameter,
                s.count,
                s.median,
                s.q25,
                s.q75,
                s.mean,
                r.bias(),
                s.variance
            )?;
        }
        for (value, count) in &self.failures {
            writeln!(out, "# failures {}={value}: {count}", self.sweep_name)?;
        }
        Ok(())
    }
}

/// Per sweep value and parameter statistics over the converged fits.
pub fn summarize(result: &StudyResult) -> Result<Summary> {
    let config = &result.config;
    let names = config.parameter_names();
    let truths = config.truths();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for s in 0..config.sweep_len() {
        let value = config.sweep_value(s);
        let (ok, failed): (Vec<_>, Vec<_>) = result.rows_for(s).partition(|r| r.converged);
        failures.push((value, failed.len()));
        for (k, name) in names.iter().enumerate() {
            let values: Vec<f64> = ok.iter().map(|r| r.estimates()[k]).collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("non-finite {name} in a converged fit")));
            }
            rows.push(SummaryRow {
                sweep_value: value,
                parameter: name.clone(),
                truth: truths[k],
                stats: Moments::of(&values),
            });
        }
    }
    Ok(Summary { sweep_name: config.sweep().name(), rows, failures })
}
