//! Fine-step Euler-Maruyama simulation of the Langevin movement model, and
//! the thinning/truncation used to turn simulated paths into observations.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{LogRsfGradient, RsfModel};
use crate::{Point2, Scalar};

/// Observation times (strictly increasing) and the matching positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    times: Vec<T>,
    points: Vec<Point2<T>>,
}

impl<T: Scalar> Track<T> {
    pub fn new(times: Vec<T>, points: Vec<Point2<T>>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(invalid(format!("{} times but {} positions", times.len(), points.len())));
        }
        if times.len() < 2 {
            return Err(Error::TooFewObservations { kept: times.len() });
        }
        if let Some(k) = times.iter().position(|t| !t.is_finite()) {
            return Err(invalid(format!("time {k} is not finite")));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(invalid(format!("times must be strictly increasing (index {})", k + 1)));
        }
        if let Some(k) = points.iter().position(|p| !p.is_finite()) {
            return Err(invalid(format!("position {k} is not finite")));
        }
        Ok(Self { times, points })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    /// `(x_prev, x_next, dt)` for every consecutive pair of observations.
    pub fn steps(&self) -> impl ExactSizeIterator<Item = (Point2<T>, Point2<T>, T)> + '_ {
        self.points.windows(2).zip(self.times.windows(2)).map(|(p, t)| (p[0], p[1], t[1] - t[0]))
    }

    /// Keeps observations `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.len() || start >= end {
            return Err(invalid(format!("bad slice {start}..{end} of a {}-point track", self.len())));
        }
        Self::new(self.times[start..end].to_vec(), self.points[start..end].to_vec())
    }

    /// Shifts all times so the first observation sits at `t = 0`.
    pub fn rebased(&self) -> Self {
        let t0 = self.times[0];
        Self { times: self.times.iter().map(|&t| t - t0).collect(), points: self.points.clone() }
    }

    /// Writes `t,x,y` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,y")?;
        for (t, p) in self.times.iter().zip(&self.points) {
            writeln!(out, "{t:.16e},{:.16e},{:.16e}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "y"] {
            return Err(Error::Parse { line: 1, message: format!("expected header t,x,y, got {headers:?}") });
        }
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let line = row + 2;
            let field = |k: usize| -> Result<T> {
                let raw = record.get(k).ok_or_else(|| Error::Parse { line, message: "missing column".into() })?;
                raw.parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse { line, message: format!("bad number {raw:?}: {e}") })
            };
            times.push(field(0)?);
            points.push(Point2::new(field(1)?, field(2)?));
        }
        Self::new(times, points)
    }
}

/// Euler-Maruyama path of `dX = (γ²/2)∇log π(X) dt + γ dW` with
/// `n_steps` steps of size `h_sim`, at times `k * h_sim`.
pub fn simulate_track<T: Scalar>(
    model: &RsfModel<T>,
    x0: Point2<T>,
    h_sim: T,
    n_steps: usize,
    seed: u64,
) -> Result<Track<T>> {
    if !(h_sim > T::zero()) || !h_sim.is_finite() {
        return Err(invalid(format!("simulation step must be positive, got {h_sim}")));
    }
    if !x0.is_finite() {
        return Err(invalid("initial position must be finite"));
    }
    if n_steps == 0 {
        return Err(invalid("n_steps must be positive"));
    }
    let drift = model.compile();
    let half_var = model.gamma_sq() * h_sim / T::lit(2.0);
    let noise_scale = (model.gamma_sq() * h_sim).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    points.push(x);
    for step in 1..=n_steps {
        let g = drift.grad_log_rsf(x);
        let z = Point2::new(T::std_normal(&mut rng), T::std_normal(&mut rng));
        x = x + g.scale(half_var) + z.scale(noise_scale);
        if !x.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        points.push(x);
    }
    let times = (0..=n_steps).map(|k| T::count(k) * h_sim).collect();
    Ok(Track { times, points })
}

/// Keeps observations `0, factor, 2 * factor, ...`; a trailing remainder
/// shorter than `factor` is dropped.
pub fn thin_track<T: Scalar>(track: &Track<T>, factor: usize) -> Result<Track<T>> {
    if factor == 0 {
        return Err(invalid("thinning factor must be at least 1"));
    }
    let times: Vec<T> = track.times.iter().step_by(factor).copied().collect();
    let points: Vec<Point2<T>> = track.points.iter().step_by(factor).copied().collect();
    if times.len() < 2 {
        return Err(Error::TooFewObservations { kept: times.len() });
    }
    Ok(Track { times, points })
}

/// Keeps the observations with `t <= t_max`.
pub fn truncate_track<T: Scalar>(track: &Track<T>, t_max: T) -> Result<Track<T>> {
    let kept = track.times.iter().take_while(|&&t| t <= t_max).count();
    if kept < 2 {
        return Err(Error::TooFewObservations { kept });
    }
    Ok(Track { times: track.times[..kept].to_vec(), points: track.points[..kept].to_vec() })
}
