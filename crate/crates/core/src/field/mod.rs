//! Habitat covariate fields `c(x)` over the plane and their gradients.
//!
//! Two kinds exist: rasters sampled on a regular grid (bilinearly
//! interpolated, with gradients precomputed per node by finite differences)
//! and the analytic squared distance to a centre point. Queries outside a
//! raster's extent are clamped to the nearest boundary point.

mod perlin;

use std::fmt::Write as _;
use std::io::{BufRead, Write};

pub use perlin::PerlinNoise;

use crate::error::{invalid, Error, Result};
use crate::{Point2, Scalar};

/// Regular grid of `nx * ny` nodes spanning `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    pub nx: usize,
    pub ny: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T, nx: usize, ny: usize) -> Result<Self> {
        let grid = Self { x_min, x_max, y_min, y_max, nx, ny };
        grid.validate()?;
        Ok(grid)
    }

    /// `n × n` nodes over the square `[-half_width, half_width]²`.
    pub fn square(half_width: T, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, -half_width, half_width, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(invalid(format!(
                "grid extent must be finite with min < max, got x [{}, {}], y [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid(format!("grid needs at least 2x2 nodes, got {}x{}", self.nx, self.ny)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::count(self.nx - 1)
    }

    pub fn dy(&self) -> T {
        (self.y_max - self.y_min) / T::count(self.ny - 1)
    }

    /// Coordinates of node `(i, j)`; `i` indexes x, `j` indexes y.
    pub fn node(&self, i: usize, j: usize) -> Point2<T> {
        Point2::new(self.x_min + self.dx() * T::count(i), self.y_min + self.dy() * T::count(j))
    }

    /// Row-major index: y outer, x inner.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn clamp(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(p.x.max(self.x_min).min(self.x_max), p.y.max(self.y_min).min(self.y_max))
    }

    /// Cell containing `p` (after clamping) and the fractional offsets in it.
    #[inline]
    fn locate(&self, p: Point2<T>) -> (usize, usize, T, T) {
        let (i, tx) = locate_axis(p.x, self.x_min, self.x_max, self.nx);
        let (j, ty) = locate_axis(p.y, self.y_min, self.y_max, self.ny);
        (i, j, tx, ty)
    }
}

#[inline]
fn locate_axis<T: Scalar>(v: T, lo: T, hi: T, n: usize) -> (usize, T) {
    let cells = T::count(n - 1);
    let v = v.max(lo).min(hi);
    let mut f = (v - lo) / (hi - lo) * cells;
    // positions within 1e-9 cells of a node snap onto it
    let nearest = f.round();
    if (f - nearest).abs() < T::lit(1e-9) {
        f = nearest;
    }
    let i = f.floor().to_usize().unwrap_or(0).min(n - 2);
    (i, f - T::count(i))
}

/// Raster covariate with precomputed gradient rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
    gradients: Vec<Point2<T>>,
}

impl<T: Scalar> Raster<T> {
    /// Builds a raster from row-major values (y outer, x inner) and
    /// precomputes gradients: central differences inside, one-sided at edges.
    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "raster expects {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx,
                grid.ny,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("raster value {k} is not finite")));
        }
        let gradients = finite_difference_gradients(&grid, &values);
        Ok(Self { grid, values, gradients })
    }

    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(Point2<T>) -> T) -> Result<Self> {
        grid.validate()?;
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.node(i, j)));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn gradients(&self) -> &[Point2<T>] {
        &self.gradients
    }

    pub fn value(&self, p: Point2<T>) -> T {
        let (i, j, tx, ty) = self.grid.locate(p);
        let nx = self.grid.nx;
        let k = j * nx + i;
        bilinear(self.values[k], self.values[k + 1], self.values[k + nx], self.values[k + nx + 1], tx, ty)
    }

    pub fn gradient(&self, p: Point2<T>) -> Point2<T> {
        interpolate_vectors(&self.grid, &self.gradients, p)
    }
}

#[inline]
fn bilinear<T: Scalar>(v00: T, v10: T, v01: T, v11: T, tx: T, ty: T) -> T {
    let one = T::one();
    let bottom = v00 * (one - tx) + v10 * tx;
    let top = v01 * (one - tx) + v11 * tx;
    bottom * (one - ty) + top * ty
}

/// Bilinear interpolation of a per-node vector raster laid out like the grid.
#[inline]
pub(crate) fn interpolate_vectors<T: Scalar>(grid: &GridSpec<T>, nodes: &[Point2<T>], p: Point2<T>) -> Point2<T> {
    let (i, j, tx, ty) = grid.locate(p);
    let nx = grid.nx;
    let k = j * nx + i;
    let (a, b, c, d) = (nodes[k], nodes[k + 1], nodes[k + nx], nodes[k + nx + 1]);
    Point2::new(bilinear(a.x, b.x, c.x, d.x, tx, ty), bilinear(a.y, b.y, c.y, d.y, tx, ty))
}

fn finite_difference_gradients<T: Scalar>(grid: &GridSpec<T>, values: &[T]) -> Vec<Point2<T>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    let two = T::lit(2.0);
    let at = |i: usize, j: usize| values[j * nx + i];
    let mut out = Vec::with_capacity(values.len());
    for j in 0..ny {
        for i in 0..nx {
            let gx = if i == 0 {
                (at(1, j) - at(0, j)) / dx
            } else if i == nx - 1 {
                (at(i, j) - at(i - 1, j)) / dx
            } else {
                (at(i + 1, j) - at(i - 1, j)) / (two * dx)
            };
            let gy = if j == 0 {
                (at(i, 1) - at(i, 0)) / dy
            } else if j == ny - 1 {
                (at(i, j) - at(i, j - 1)) / dy
            } else {
                (at(i, j + 1) - at(i, j - 1)) / (two * dy)
            };
            out.push(Point2::new(gx, gy));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind<T> {
    Raster(Raster<T>),
    /// `c(x) = |x - center|²`.
    QuadraticDistance {
        center: Point2<T>,
    },
}

/// A labelled scalar covariate over the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateField<T> {
    pub id: String,
    pub kind: FieldKind<T>,
}

impl<T: Scalar> CovariateField<T> {
    pub fn raster(id: impl Into<String>, raster: Raster<T>) -> Self {
        Self { id: id.into(), kind: FieldKind::Raster(raster) }
    }

    pub fn quadratic_distance(id: impl Into<String>, center: Point2<T>) -> Self {
        Self { id: id.into(), kind: FieldKind::QuadraticDistance { center } }
    }

    #[inline]
    pub fn value(&self, p: Point2<T>) -> T {
        match &self.kind {
            FieldKind::Raster(r) => r.value(p),
            FieldKind::QuadraticDistance { center } => (p - *center).norm_sq(),
        }
    }

    #[inline]
    pub fn gradient(&self, p: Point2<T>) -> Point2<T> {
        match &self.kind {
            FieldKind::Raster(r) => r.gradient(p),
            FieldKind::QuadraticDistance { center } => (p - *center).scale(T::lit(2.0)),
        }
    }

    pub fn as_raster(&self) -> Option<&Raster<T>> {
        match &self.kind {
            FieldKind::Raster(r) => Some(r),
            FieldKind::QuadraticDistance { .. } => None,
        }
    }
}

/// Perlin-noise raster: node `(x, y)` holds `noise(frequency * x, frequency * y)`.
pub fn generate_perlin_field<T: Scalar>(seed: u64, frequency: T, grid: GridSpec<T>) -> Result<CovariateField<T>> {
    if !(frequency > T::zero()) || !frequency.is_finite() {
        return Err(invalid(format!("perlin frequency must be positive, got {frequency}")));
    }
    let noise = PerlinNoise::new(seed);
    let freq = frequency.to_f64_lossy();
    let raster = Raster::from_fn(grid, |p| T::lit(noise.get(freq * p.x.to_f64_lossy(), freq * p.y.to_f64_lossy())))?;
    Ok(CovariateField::raster(format!("perlin-{seed}"), raster))
}

pub fn quadratic_distance_field<T: Scalar>(center: Point2<T>) -> CovariateField<T> {
    CovariateField::quadratic_distance("sqdist", center)
}

pub fn field_value<T: Scalar>(field: &CovariateField<T>, p: Point2<T>) -> T {
    field.value(p)
}

pub fn field_gradient<T: Scalar>(field: &CovariateField<T>, p: Point2<T>) -> Point2<T> {
    field.gradient(p)
}

/// Writes the text raster format: a header `x_min x_max y_min y_max nx ny`
/// followed by the values, one row of x per line, 17 significant digits.
pub fn write_raster<T: Scalar, W: Write>(raster: &Raster<T>, mut out: W) -> Result<()> {
    let g = raster.grid();
    writeln!(out, "{:.16e} {:.16e} {:.16e} {:.16e} {} {}", g.x_min, g.x_max, g.y_min, g.y_max, g.nx, g.ny)?;
    let mut line = String::new();
    for row in raster.values().chunks(g.nx) {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            write!(line, "{v:.16e}").expect("writing to a String cannot fail");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_raster<T: Scalar, R: BufRead>(input: R) -> Result<Raster<T>> {
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        tokens.extend(line.split_whitespace().map(|t| (n + 1, t.to_owned())));
    }
    if tokens.len() < 6 {
        return Err(Error::Parse { line: 1, message: "missing raster header".into() });
    }
    let real = |(line, tok): &(usize, String)| -> Result<T> {
        tok.parse::<f64>()
            .map(T::lit)
            .map_err(|e| Error::Parse { line: *line, message: format!("bad number {tok:?}: {e}") })
    };
    let count = |(line, tok): &(usize, String)| -> Result<usize> {
        tok.parse::<usize>().map_err(|e| Error::Parse { line: *line, message: format!("bad node count {tok:?}: {e}") })
    };
    let grid = GridSpec::new(
        real(&tokens[0])?,
        real(&tokens[1])?,
        real(&tokens[2])?,
        real(&tokens[3])?,
        count(&tokens[4])?,
        count(&tokens[5])?,
    )?;
    let values = tokens[6..].iter().map(real).collect::<Result<Vec<T>>>()?;
    if values.len() != grid.len() {
        let line = tokens.last().map_or(1, |t| t.0);
        return Err(Error::Parse {
            line,
            message: format!("expected {} raster values, found {}", grid.len(), values.len()),
        });
    }
    Raster::from_values(grid, values)
}
