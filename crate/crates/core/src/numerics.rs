//! Uniform-grid calculus: quadrature, finite differences and direct
//! convolution with kernels sampled on offset grids.
//!
//! Quadrature is composite Simpson (with a 3/8 closing panel for an even
//! number of points), derivatives are fourth-order accurate everywhere
//! (five-point central stencils inside, one-sided stencils at the ends).

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;

/// Mass (relative to the total) tolerated within one kernel width of a
/// grid boundary before a convolution is flagged.
pub const BOUNDARY_MASS_TOL: f64 = 1e-10;

/// Values that can be integrated and differentiated on a grid.
pub trait Sample:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}

impl Sample for f64 {}
impl Sample for Complex64 {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() {
            return Err(Error::InvalidGrid(format!("x_min must be finite, got {x_min}")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
        }
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        Ok(Self { x_min, dx, n_points })
    }

    /// Grid of `n_points` spanning `center ± half_span`.
    pub fn centered(center: f64, half_span: f64, n_points: usize) -> Result<Self> {
        if !(half_span > 0.0 && half_span.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half span must be positive, got {half_span}"
            )));
        }
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        Self::new(
            center - half_span,
            2.0 * half_span / (n_points - 1) as f64,
            n_points,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n_points - 1)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the node closest to the middle of the span.
    pub fn center_index(&self) -> usize {
        self.n_points / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.x(i))).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexGridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// Composite Simpson sum of uniformly spaced samples. Exact for cubics.
pub fn simpson<T: Sample>(values: &[T], dx: f64) -> T {
    let n = values.len();
    match n {
        0 | 1 => T::default(),
        2 => (values[0] + values[1]) * (0.5 * dx),
        3 => (values[0] + values[1] * 4.0 + values[2]) * (dx / 3.0),
        _ => {
            // An odd count is pure Simpson; an even count closes with a 3/8 panel.
            let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
            let mut acc = T::default();
            let mut i = 0;
            while i < simpson_end {
                acc = acc + (values[i] + values[i + 1] * 4.0 + values[i + 2]) * (dx / 3.0);
                i += 2;
            }
            if n % 2 == 0 {
                let v = &values[n - 4..];
                acc = acc + (v[0] + v[1] * 3.0 + v[2] * 3.0 + v[3]) * (3.0 * dx / 8.0);
            }
            acc
        }
    }
}

pub fn integrate(f: &GridFunction) -> f64 {
    simpson(&f.values, f.grid.dx)
}

pub fn integrate_complex(f: &ComplexGridFunction) -> Complex64 {
    simpson(&f.values, f.grid.dx)
}

/// Fourth-order finite-difference derivative of order 1 or 2 on raw samples.
pub fn differentiate<T: Sample>(values: &[T], dx: f64, order: u8) -> Result<Vec<T>> {
    let n = values.len();
    if n < MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_POINTS} samples to differentiate, got {n}"
        )));
    }
    let f = values;
    let mut out = vec![T::default(); n];
    match order {
        1 => {
            let s = 1.0 / (12.0 * dx);
            for i in 2..n - 2 {
                out[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * s;
            }
            out[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * s;
            out[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * s;
            let m = n - 1;
            out[m] = (f[m] * 25.0 - f[m - 1] * 48.0 + f[m - 2] * 36.0 - f[m - 3] * 16.0
                + f[m - 4] * 3.0)
                * s;
            out[m - 1] = (f[m] * 3.0 + f[m - 1] * 10.0 - f[m - 2] * 18.0 + f[m - 3] * 6.0
                - f[m - 4])
                * s;
        }
        2 => {
            let s = 1.0 / (12.0 * dx * dx);
            for i in 2..n - 2 {
                out[i] = (f[i - 1] * 16.0 + f[i + 1] * 16.0 - f[i] * 30.0 - f[i - 2] - f[i + 2]) * s;
            }
            // Six-point one-sided stencils keep fourth-order accuracy at the ends.
            let left = |f0: T, f1: T, f2: T, f3: T, f4: T, f5: T| {
                (f0 * 45.0 - f1 * 154.0 + f2 * 214.0 - f3 * 156.0 + f4 * 61.0 - f5 * 10.0) * s
            };
            let near = |f0: T, f1: T, f2: T, f3: T, f4: T, f5: T| {
                (f0 * 10.0 - f1 * 15.0 - f2 * 4.0 + f3 * 14.0 - f4 * 6.0 + f5) * s
            };
            out[0] = left(f[0], f[1], f[2], f[3], f[4], f[5]);
            out[1] = near(f[0], f[1], f[2], f[3], f[4], f[5]);
            let m = n - 1;
            out[m] = left(f[m], f[m - 1], f[m - 2], f[m - 3], f[m - 4], f[m - 5]);
            out[m - 1] = near(f[m], f[m - 1], f[m - 2], f[m - 3], f[m - 4], f[m - 5]);
        }
        other => return Err(Error::DerivativeOrder(other)),
    }
    Ok(out)
}

pub fn derivative(f: &GridFunction, order: u8) -> Result<GridFunction> {
    GridFunction::new(f.grid, differentiate(&f.values, f.grid.dx, order)?)
}

pub fn derivative_complex(f: &ComplexGridFunction, order: u8) -> Result<ComplexGridFunction> {
    ComplexGridFunction::new(f.grid, differentiate(&f.values, f.grid.dx, order)?)
}

/// Running integral `F(x_i) = ∫_{x_anchor}^{x_i} f dx`, accurate to fourth
/// order (cubic interpolation over each cell).
pub fn cumulative_integral(f: &GridFunction, anchor: usize) -> Result<GridFunction> {
    let n = f.grid.len();
    if anchor >= n {
        return Err(Error::InvalidInput(format!(
            "anchor {anchor} outside a grid of {n} points"
        )));
    }
    let v = &f.values;
    let h = f.grid.dx / 24.0;
    let cell = |j: usize| -> f64 {
        if j == 0 {
            h * (9.0 * v[0] + 19.0 * v[1] - 5.0 * v[2] + v[3])
        } else if j == n - 2 {
            h * (v[n - 4] - 5.0 * v[n - 3] + 19.0 * v[n - 2] + 9.0 * v[n - 1])
        } else {
            h * (-v[j - 1] + 13.0 * v[j] + 13.0 * v[j + 1] - v[j + 2])
        }
    };
    let mut out = vec![0.0; n];
    for j in anchor..n - 1 {
        out[j + 1] = out[j] + cell(j);
    }
    for j in (0..anchor).rev() {
        out[j] = out[j + 1] - cell(j);
    }
    GridFunction::new(f.grid, out)
}

/// A kernel `K(u)` sampled at offsets `u = (first_offset + i)·dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    dx: f64,
    first_offset: i64,
    values: Vec<f64>,
}

impl SampledKernel {
    pub fn new(dx: f64, first_offset: i64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidInput(format!("kernel dx must be positive, got {dx}")));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("kernel has no samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel has non-finite samples".into()));
        }
        Ok(Self {
            dx,
            first_offset,
            values,
        })
    }

    /// Discrete Dirac delta: one cell of height `1/dx`.
    pub fn delta(dx: f64) -> Result<Self> {
        Self::new(dx, 0, vec![1.0 / dx])
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn first_offset(&self) -> i64 {
        self.first_offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| (self.first_offset + i as i64) as f64 * self.dx)
    }

    /// Discrete normalization `Σ K·dx`; convolution preserves `Σ f·dx` exactly
    /// when this is 1.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Standard deviation of the kernel treated as a distribution over offsets.
    pub fn effective_width(&self) -> f64 {
        let mass = self.mass();
        if mass == 0.0 {
            return 0.0;
        }
        let (m1, m2) = self
            .offsets()
            .zip(&self.values)
            .fold((0.0, 0.0), |(a, b), (u, &k)| (a + u * k, b + u * u * k));
        let mean = m1 * self.dx / mass;
        (m2 * self.dx / mass - mean * mean).max(0.0).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.dx,
            self.first_offset,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn normalized(&self) -> Result<Self> {
        let mass = self.mass();
        if mass == 0.0 {
            return Err(Error::KernelInvalid("kernel has zero mass".into()));
        }
        self.scaled(1.0 / mass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convolution {
    pub field: GridFunction,
    /// `f` carries non-negligible mass within one kernel width of an edge.
    pub boundary_warning: bool,
}

/// Direct-sum convolution `g(x_i) = Σ_j K(x_i − x_j) f(x_j) dx`.
pub fn convolve(f: &GridFunction, kernel: &SampledKernel) -> Result<Convolution> {
    let grid = f.grid;
    let dx = grid.dx;
    if (kernel.dx - dx).abs() > 1e-9 * dx {
        return Err(Error::SpacingMismatch {
            grid: dx,
            kernel: kernel.dx,
        });
    }
    let n = grid.len() as i64;
    let lo = kernel.first_offset;
    let hi = lo + kernel.values.len() as i64 - 1;
    let fv = &f.values;
    let kv = &kernel.values;
    let mut out = vec![0.0; grid.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let i = i as i64;
        // offset o = i - j must lie in [lo, hi] and j in [0, n)
        let j_min = (i - hi).max(0);
        let j_max = (i - lo).min(n - 1);
        let mut acc = 0.0;
        let mut j = j_min;
        while j <= j_max {
            acc += kv[(i - j - lo) as usize] * fv[j as usize];
            j += 1;
        }
        *slot = acc * dx;
    }

    let band = ((kernel.effective_width() / dx).ceil() as usize).max(1).min(grid.len() / 2);
    let total: f64 = fv.iter().map(|v| v.abs()).sum();
    let edge: f64 = fv[..band].iter().chain(&fv[fv.len() - band..]).map(|v| v.abs()).sum();
    let boundary_warning = total > 0.0 && edge > BOUNDARY_MASS_TOL * total;

    Ok(Convolution {
        field: GridFunction::new(grid, out)?,
        boundary_warning,
    })
}
