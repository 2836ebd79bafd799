use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::runner::StudyResult;
use super::summary::quantile_sorted;
use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Tukey box: quartiles, whiskers at the most extreme points within
/// 1.5 IQR of the box, and everything beyond as outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if sorted.is_empty() {
            return None;
        }
        sorted.sort_by(f64::total_cmp);
        let q25 = quantile_sorted(&sorted, 0.25);
        let q75 = quantile_sorted(&sorted, 0.75);
        let reach = 1.5 * (q75 - q25);
        let (lo_fence, hi_fence) = (q25 - reach, q75 + reach);
        let inside = || sorted.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence);
        Some(Self {
            q25,
            median: quantile_sorted(&sorted, 0.5),
            q75,
            whisker_low: inside().fold(f64::INFINITY, f64::min),
            whisker_high: inside().fold(f64::NEG_INFINITY, f64::max),
            outliers: sorted.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
        })
    }
}

/// Maps data values onto the vertical pixel range of the plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YScale {
    pub lo: f64,
    pub hi: f64,
    pub px_top: f64,
    pub px_bottom: f64,
}

impl YScale {
    /// Range covering `values` with 5% padding. A zero-width range is
    /// widened to ±1 (or ±10% of the value) around it.
    pub fn covering(values: impl IntoIterator<Item = f64>, px_top: f64, px_bottom: f64) -> Self {
        let (mut lo, mut hi) = values
            .into_iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
            let half = (0.1 * lo.abs()).max(1.0);
            (lo, hi) = (lo - half, hi + half);
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, px_top, px_bottom }
    }

    pub fn to_px(&self, v: f64) -> f64 {
        self.px_bottom - (v - self.lo) / (self.hi - self.lo) * (self.px_bottom - self.px_top)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Box plot with one box per group and an optional dashed horizontal line
/// at the true value.
pub fn boxplot_svg(title: &str, x_label: &str, labels: &[String], groups: &[Vec<f64>], truth: Option<f64>) -> String {
    let boxes: Vec<Option<BoxStats>> = groups.iter().map(|g| BoxStats::of(g)).collect();
    let all = groups.iter().flatten().copied().chain(truth);
    let y = YScale::covering(all, MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let slot = plot_w / groups.len().max(1) as f64;
    let half_box = (slot * 0.3).min(40.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{bottom}" x2="{x1}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line class="axis" x1="{x0}" y1="{top}" x2="{x0}" y2="{bottom}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = y.lo + (y.hi - y.lo) * k as f64 / 4.0;
        let py = y.to_px(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, x0 - 8.0, py + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );

    for (k, (label, stats)) in labels.iter().zip(&boxes).enumerate() {
        let cx = x0 + slot * (k as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 18.0, escape(label));
        let Some(b) = stats else { continue };
        let (l, r) = (cx - half_box, cx + half_box);
        let _ = writeln!(s, r#"<g class="box">"#);
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y.to_px(b.whisker_low),
            y.to_px(b.q25)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y.to_px(b.q75),
            y.to_px(b.whisker_high)
        );
        for w in [b.whisker_low, b.whisker_high] {
            let py = y.to_px(w);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black"/>"#,
                cx - half_box / 2.0,
                cx + half_box / 2.0
            );
        }
        let (pt, pb) = (y.to_px(b.q75), y.to_px(b.q25));
        let _ = writeln!(
            s,
            r##"<rect x="{l:.2}" y="{pt:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
            r - l,
            (pb - pt).max(0.5)
        );
        let pm = y.to_px(b.median);
        let _ = writeln!(
            s,
            r#"<line class="median" x1="{l:.2}" y1="{pm:.2}" x2="{r:.2}" y2="{pm:.2}" stroke="black" stroke-width="2"/>"#
        );
        for o in &b.outliers {
            let _ = writeln!(
                s,
                r#"<circle class="outlier" cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#,
                y.to_px(*o)
            );
        }
        let _ = writeln!(s, "</g>");
    }

    if let Some(t) = truth {
        let py = y.to_px(t);
        let _ = writeln!(
            s,
            r#"<line class="truth" x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="red" stroke-dasharray="6,4"/>"#
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the box plot of parameter `parameter` (index into
/// `beta1..betaJ, gamma_sq`) across the sweep, using converged fits only.
pub fn emit_boxplot(result: &StudyResult, parameter: usize, path: &Path) -> Result<()> {
    let config = &result.config;
    let name = &config.parameter_names()[parameter];
    let truth = config.truths()[parameter];
    let sweep = config.sweep();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for s in 0..config.sweep_len() {
        labels.push(format!("{}", config.sweep_value(s)));
        groups.push(result.rows_for(s).filter(|r| r.converged).map(|r| r.estimates()[parameter]).collect());
    }
    let title = format!("{name} estimates ({} fits)", config.method.as_str());
    fs::write(path, boxplot_svg(&title, sweep.name(), &labels, &groups, Some(truth)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_maps_range_to_pixels() {
        let y = YScale { lo: 0.0, hi: 10.0, px_top: 40.0, px_bottom: 340.0 };
        assert_eq!(y.to_px(0.0), 340.0);
        assert_eq!(y.to_px(10.0), 40.0);
        assert_eq!(y.to_px(5.0), 190.0);
    }

    #[test]
    fn degenerate_range_is_widened() {
        let y = YScale::covering([3.0, 3.0, 3.0], 0.0, 100.0);
        assert!(y.hi > y.lo);
        assert!((y.to_px(3.0) - 50.0).abs() < 1e-9);
        let empty = YScale::covering(std::iter::empty(), 0.0, 100.0);
        assert!(empty.hi > empty.lo);
    }

    #[test]
    fn whiskers_and_outliers() {
        let mut v: Vec<f64> = (1..=9).map(f64::from).collect();
        v.push(100.0);
        let b = BoxStats::of(&v).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_high, 9.0);
        assert_eq!(b.whisker_low, 1.0);
        assert!(BoxStats::of(&[]).is_none());
    }

    #[test]
    fn one_box_per_group_and_a_truth_line() {
        let labels = vec!["0.1".to_string(), "1".to_string(), "2".to_string()];
        let groups = vec![vec![1.0, 2.0, 3.0], vec![2.0; 4], vec![]];
        let svg = boxplot_svg("beta1", "dt", &labels, &groups, Some(2.0));
        assert_eq!(svg.matches(r#"<g class="box">"#).count(), 2);
        assert_eq!(svg.matches(r#"class="truth""#).count(), 1);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
