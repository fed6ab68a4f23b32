//! Truncated matrix-valued Fourier series on the torus `T^d`.
//!
//! A [`FourierMap`] stores the coefficients `f̂_k` of a real-analytic map
//! `f: T^d → R^{n1×n2}` for every `k` in the box `|k_i| ≤ N_i`, with the
//! convention `f(θ) = Σ_k f̂_k e^{2πi k·θ}`. Nonlinear work is done on a
//! uniform sampling grid ([`GridField`]) and projected back with an FFT.
//!
//! Analytic strip norms are realised by the Fourier majorant
//! `Σ_k |f̂_k| e^{2π|k|₁ρ}`, taken entrywise and combined with the max-row-sum
//! matrix norm (max-column-sum for the transposed variant).

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking the conjugate symmetry of real maps.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("grid of {grid} points on axis {axis} cannot resolve band limit {band}")]
    GridTooSmall { axis: usize, grid: usize, band: usize },
    #[error("axis {axis} out of range for torus dimension {d}")]
    InvalidAxis { axis: usize, d: usize },
    #[error("strip norm overflows at rho = {rho}; the strip is too wide for this truncation")]
    NormOverflow { rho: f64 },
    #[error("invalid strip data: rho = {rho}, delta = {delta}")]
    InvalidStrip { rho: f64, delta: f64 },
    #[error("malformed Fourier map document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, FourierError>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place multidimensional FFT over a row-major array of the given shape.
///
/// The inverse direction computes `Σ_k c_k e^{+2πi k j / M}` without any
/// normalisation, the forward direction the conjugate sum.
fn fft_nd(data: &mut [Complex64], shape: &[usize], direction: FftDirection) {
    let total: usize = shape.iter().product();
    debug_assert_eq!(total, data.len());
    for axis in 0..shape.len() {
        let len = shape[axis];
        if len == 1 {
            continue;
        }
        let stride: usize = shape[axis + 1..].iter().product();
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction));
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let outer = total / (len * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * len * stride + s;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[base + j * stride] = *value;
                }
            }
        }
    }
}

/// Per-direction grid sizes suited to products of two maps with the given bands.
///
/// Each size is a power of two not smaller than `4 N_i`, so that the product of
/// two maps with band `N` is resolved without aliasing into the retained box.
pub fn dealias_grid(bands: &[usize]) -> Vec<usize> {
    bands
        .iter()
        .map(|&n| (4 * n).max(8).next_power_of_two())
        .collect()
}

fn check_grid(bands: &[usize], grid: &[usize]) -> Result<()> {
    if bands.len() != grid.len() {
        return Err(FourierError::DimensionMismatch(format!(
            "{} band limits but {} grid sizes",
            bands.len(),
            grid.len()
        )));
    }
    for (axis, (&n, &m)) in bands.iter().zip(grid).enumerate() {
        if m < 2 * n + 1 {
            return Err(FourierError::GridTooSmall { axis, grid: m, band: n });
        }
    }
    Ok(())
}

/// Row-major multi-index helpers for a box of shape `shape`.
fn unravel(mut index: usize, shape: &[usize], out: &mut [usize]) {
    for axis in (0..shape.len()).rev() {
        out[axis] = index % shape[axis];
        index /= shape[axis];
    }
}

/// Samples of a matrix-valued map at the points `θ_j = j / M` of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Vec<usize>,
    rows: usize,
    cols: usize,
    values: Vec<DMatrix<f64>>,
}

impl GridField {
    /// Wraps point values listed in row-major grid order.
    pub fn new(grid: Vec<usize>, rows: usize, cols: usize, values: Vec<DMatrix<f64>>) -> Result<Self> {
        let points: usize = grid.iter().product();
        if values.len() != points {
            return Err(FourierError::DimensionMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                points
            )));
        }
        if values.iter().any(|v| v.nrows() != rows || v.ncols() != cols) {
            return Err(FourierError::DimensionMismatch(format!(
                "sample shape differs from {rows}x{cols}"
            )));
        }
        Ok(Self { grid, rows, cols, values })
    }

    /// Evaluates `f(θ)` at every grid point, in parallel, keeping grid order.
    pub fn from_fn<F>(grid: &[usize], rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Sync,
    {
        let points: usize = grid.iter().product();
        let values: Vec<DMatrix<f64>> = (0..points)
            .into_par_iter()
            .map(|p| f(&grid_point(grid, p)))
            .collect();
        Self { grid: grid.to_vec(), rows, cols, values }
    }

    /// Pointwise map over the samples, in parallel, keeping grid order.
    pub fn map<F>(&self, rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, &DMatrix<f64>) -> DMatrix<f64> + Sync,
    {
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(p, v)| f(p, v))
            .collect();
        Self { grid: self.grid.clone(), rows, cols, values }
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn at(&self, p: usize) -> &DMatrix<f64> {
        &self.values[p]
    }

    /// Point `θ_p` of the grid.
    pub fn point(&self, p: usize) -> Vec<f64> {
        grid_point(&self.grid, p)
    }

    /// Arithmetic mean of the samples, accumulated in grid order.
    pub fn mean(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for v in &self.values {
            acc += v;
        }
        acc / self.values.len() as f64
    }

    /// Largest absolute entry over all samples.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Coordinates of grid point `p` in `[0, 1)^d`.
pub fn grid_point(grid: &[usize], p: usize) -> Vec<f64> {
    let mut idx = vec![0; grid.len()];
    unravel(p, grid, &mut idx);
    idx.iter().zip(grid).map(|(&j, &m)| j as f64 / m as f64).collect()
}

/// Majorant strip norm `‖·‖_ρ` of a periodic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripNorm {
    pub rho: f64,
    pub value: f64,
}

/// Which Cauchy estimate to apply when losing analyticity width `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyKind {
    /// A single partial derivative `∂u/∂θ_ℓ`: factor `1/δ`.
    Partial,
    /// The full derivative `Du` of a scalar or vector map: factor `d/δ`.
    Derivative,
    /// The transposed derivative `(Du)^⊤` of a scalar map: factor `1/δ`.
    DerivativeTranspose,
    /// The transposed derivative `(Dw)^⊤` of a map into `C^n`: factor `n/δ`.
    VectorDerivativeTranspose,
}

/// Bound on the norm of a derivative on the strip of width `ρ − δ`.
///
/// `d` is the torus dimension and `n` the length of the vector for
/// [`CauchyKind::VectorDerivativeTranspose`].
pub fn cauchy_bound(norm: StripNorm, delta: f64, kind: CauchyKind, d: usize, n: usize) -> Result<StripNorm> {
    if !(delta > 0.0 && delta < norm.rho) {
        return Err(FourierError::InvalidStrip { rho: norm.rho, delta });
    }
    let factor = match kind {
        CauchyKind::Partial | CauchyKind::DerivativeTranspose => 1.0,
        CauchyKind::Derivative => d as f64,
        CauchyKind::VectorDerivativeTranspose => n as f64,
    };
    Ok(StripNorm { rho: norm.rho - delta, value: factor * norm.value / delta })
}

/// Real-analytic periodic map `T^d → R^{n1×n2}` stored by truncated Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMap {
    rows: usize,
    cols: usize,
    bands: Vec<usize>,
    grid: Vec<usize>,
    /// Coefficients in row-major `k` order, each mode holding its matrix row-major.
    coeffs: Vec<Complex64>,
}

impl FourierMap {
    /// The zero map with the given band limits and working grid.
    pub fn zeros(bands: &[usize], grid: &[usize], rows: usize, cols: usize) -> Result<Self> {
        check_grid(bands, grid)?;
        if bands.is_empty() {
            return Err(FourierError::DimensionMismatch("torus dimension must be positive".into()));
        }
        let modes: usize = bands.iter().map(|&n| 2 * n + 1).product();
        Ok(Self {
            rows,
            cols,
            bands: bands.to_vec(),
            grid: grid.to_vec(),
            coeffs: vec![Complex64::new(0.0, 0.0); modes * rows * cols],
        })
    }

    /// Constant map with value `m`.
    pub fn constant(bands: &[usize], grid: &[usize], m: &DMatrix<f64>) -> Result<Self> {
        let mut f = Self::zeros(bands, grid, m.nrows(), m.ncols())?;
        let zero = f.zero_index();
        let (ne, cols) = (f.entries(), f.cols);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                f.coeffs[zero * ne + i * cols + j] = Complex64::new(m[(i, j)], 0.0);
            }
        }
        Ok(f)
    }

    /// Map whose coefficients are given by `coeff(k, i, j)`; conjugate symmetry is then enforced.
    pub fn from_coefficients<F>(bands: &[usize], grid: &[usize], rows: usize, cols: usize, coeff: F) -> Result<Self>
    where
        F: Fn(&[i64], usize, usize) -> Complex64,
    {
        let mut f = Self::zeros(bands, grid, rows, cols)?;
        let ne = f.entries();
        for m in 0..f.num_modes() {
            let k = f.mode(m);
            for i in 0..rows {
                for j in 0..cols {
                    f.coeffs[m * ne + i * cols + j] = coeff(&k, i, j);
                }
            }
        }
        f.enforce_symmetry();
        Ok(f)
    }

    /// Samples `f(θ)` on the working grid and projects onto the band box.
    pub fn from_fn<F>(bands: &[usize], grid: &[usize], rows: usize, cols: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Sync,
    {
        check_grid(bands, grid)?;
        Self::from_samples(&GridField::from_fn(grid, rows, cols, f), bands)
    }

    /// FFT analysis of grid samples, truncated to `bands`.
    ///
    /// The samples' grid becomes the working grid of the result.
    pub fn from_samples(samples: &GridField, bands: &[usize]) -> Result<Self> {
        let grid = samples.grid.clone();
        let mut out = Self::zeros(bands, &grid, samples.rows, samples.cols)?;
        let points = samples.len();
        let ne = out.entries();
        let modes = out.num_modes();
        let scale = 1.0 / points as f64;
        let positions = out.grid_positions(&grid);
        let per_entry: Vec<Vec<Complex64>> = (0..ne)
            .into_par_iter()
            .map(|e| {
                let (i, j) = (e / samples.cols, e % samples.cols);
                let mut buf: Vec<Complex64> = samples
                    .values
                    .iter()
                    .map(|v| Complex64::new(v[(i, j)], 0.0))
                    .collect();
                fft_nd(&mut buf, &grid, FftDirection::Forward);
                positions.iter().map(|&q| buf[q] * scale).collect()
            })
            .collect();
        for (e, column) in per_entry.into_iter().enumerate() {
            for m in 0..modes {
                out.coeffs[m * ne + e] = column[m];
            }
        }
        out.enforce_symmetry();
        Ok(out)
    }

    /// Samples on the working grid.
    pub fn eval_grid(&self) -> GridField {
        self.eval_on(&self.grid.clone()).expect("working grid resolves the band box")
    }

    /// Samples on another uniform grid that resolves the band box.
    pub fn eval_on(&self, grid: &[usize]) -> Result<GridField> {
        check_grid(&self.bands, grid)?;
        let points: usize = grid.iter().product();
        let ne = self.entries();
        let positions = self.grid_positions(grid);
        let per_entry: Vec<Vec<f64>> = (0..ne)
            .into_par_iter()
            .map(|e| {
                let mut buf = vec![Complex64::new(0.0, 0.0); points];
                for (m, &q) in positions.iter().enumerate() {
                    buf[q] = self.coeffs[m * ne + e];
                }
                fft_nd(&mut buf, grid, FftDirection::Inverse);
                buf.iter().map(|c| c.re).collect()
            })
            .collect();
        let values = (0..points)
            .map(|p| DMatrix::from_fn(self.rows, self.cols, |i, j| per_entry[i * self.cols + j][p]))
            .collect();
        GridField::new(grid.to_vec(), self.rows, self.cols, values)
    }

    /// Direct evaluation `Σ_k f̂_k e^{2πi k·θ}` at one point.
    pub fn eval_at(&self, theta: &[f64]) -> DMatrix<f64> {
        let ne = self.entries();
        let mut acc = vec![Complex64::new(0.0, 0.0); ne];
        for m in 0..self.num_modes() {
            let k = self.mode(m);
            let phase: f64 = k.iter().zip(theta).map(|(&ki, &t)| ki as f64 * t).sum();
            let w = Complex64::from_polar(1.0, 2.0 * PI * phase);
            for (e, a) in acc.iter_mut().enumerate() {
                *a += self.coeffs[m * ne + e] * w;
            }
        }
        DMatrix::from_fn(self.rows, self.cols, |i, j| acc[i * self.cols + j].re)
    }

    pub fn torus_dim(&self) -> usize {
        self.bands.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> &[usize] {
        &self.bands
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    /// Number of Fourier modes in the band box.
    pub fn num_modes(&self) -> usize {
        self.bands.iter().map(|&n| 2 * n + 1).product()
    }

    fn entries(&self) -> usize {
        self.rows * self.cols
    }

    fn box_shape(&self) -> Vec<usize> {
        self.bands.iter().map(|&n| 2 * n + 1).collect()
    }

    fn zero_index(&self) -> usize {
        self.num_modes() / 2
    }

    /// Integer vector `k` of mode index `m`.
    pub fn mode(&self, m: usize) -> Vec<i64> {
        let shape = self.box_shape();
        let mut idx = vec![0; shape.len()];
        unravel(m, &shape, &mut idx);
        idx.iter().zip(&self.bands).map(|(&j, &n)| j as i64 - n as i64).collect()
    }

    /// Mode index of `k`, if it lies in the band box.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.bands.len() {
            return None;
        }
        let mut m = 0usize;
        for (&ki, &n) in k.iter().zip(&self.bands) {
            if ki.unsigned_abs() as usize > n {
                return None;
            }
            m = m * (2 * n + 1) + (ki + n as i64) as usize;
        }
        Some(m)
    }

    /// Linear positions of the band box inside a row-major sampling grid.
    fn grid_positions(&self, grid: &[usize]) -> Vec<usize> {
        (0..self.num_modes())
            .map(|m| {
                let k = self.mode(m);
                k.iter().zip(grid).fold(0usize, |acc, (&ki, &g)| {
                    acc * g + ki.rem_euclid(g as i64) as usize
                })
            })
            .collect()
    }

    /// Coefficient `f̂_k` of entry `(i, j)`; zero outside the band box.
    pub fn coeff(&self, k: &[i64], i: usize, j: usize) -> Complex64 {
        match self.index_of(k) {
            Some(m) => self.coeffs[m * self.entries() + i * self.cols + j],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Sets `f̂_k` and its mirror `f̂_{−k} = conj(f̂_k)` for entry `(i, j)`.
    pub fn set_coeff(&mut self, k: &[i64], i: usize, j: usize, value: Complex64) {
        let ne = self.entries();
        if let Some(m) = self.index_of(k) {
            let mirror = self.num_modes() - 1 - m;
            let e = i * self.cols + j;
            if m == mirror {
                self.coeffs[m * ne + e] = Complex64::new(value.re, 0.0);
            } else {
                self.coeffs[m * ne + e] = value;
                self.coeffs[mirror * ne + e] = value.conj();
            }
        }
    }

    /// Raw coefficient storage, row-major in `k`, each mode row-major in the matrix entries.
    pub fn raw_coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Replaces `f̂_k` by the conjugate-symmetric part so that the map stays real.
    fn enforce_symmetry(&mut self) {
        let ne = self.entries();
        let modes = self.num_modes();
        for m in 0..=modes / 2 {
            let mirror = modes - 1 - m;
            for e in 0..ne {
                let a = self.coeffs[m * ne + e];
                let b = self.coeffs[mirror * ne + e];
                let sym = (a + b.conj()) * 0.5;
                self.coeffs[m * ne + e] = sym;
                self.coeffs[mirror * ne + e] = sym.conj();
            }
        }
    }

    /// Largest `|f̂_{−k} − conj(f̂_k)|` over the box.
    pub fn symmetry_defect(&self) -> f64 {
        let ne = self.entries();
        let modes = self.num_modes();
        let mut worst = 0.0_f64;
        for m in 0..modes {
            let mirror = modes - 1 - m;
            for e in 0..ne {
                worst = worst.max((self.coeffs[mirror * ne + e] - self.coeffs[m * ne + e].conj()).norm());
            }
        }
        worst
    }

    fn same_layout(&self, other: &Self) -> Result<()> {
        if self.bands != other.bands || self.rows != other.rows || self.cols != other.cols {
            return Err(FourierError::DimensionMismatch(format!(
                "{}x{} map with bands {:?} against {}x{} map with bands {:?}",
                self.rows, self.cols, self.bands, other.rows, other.cols, other.bands
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_layout(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= *b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Adds a constant matrix to the average.
    pub fn add_constant(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return Err(FourierError::DimensionMismatch("constant of wrong shape".into()));
        }
        let mut out = self.clone();
        let zero = out.zero_index();
        let ne = out.entries();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.coeffs[zero * ne + i * self.cols + j] += Complex64::new(m[(i, j)], 0.0);
            }
        }
        Ok(out)
    }

    /// Pointwise transpose.
    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        out.rows = self.cols;
        out.cols = self.rows;
        let ne = self.entries();
        for m in 0..self.num_modes() {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    out.coeffs[m * ne + j * self.rows + i] = self.coeffs[m * ne + i * self.cols + j];
                }
            }
        }
        out
    }

    /// Sub-block of rows `r0..r0+nr` and columns `c0..c0+nc`.
    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> Result<Self> {
        if r0 + nr > self.rows || c0 + nc > self.cols {
            return Err(FourierError::DimensionMismatch("block exceeds map shape".into()));
        }
        let mut out = Self::zeros(&self.bands, &self.grid, nr, nc)?;
        let (ne, ne_out) = (self.entries(), nr * nc);
        for m in 0..self.num_modes() {
            for i in 0..nr {
                for j in 0..nc {
                    out.coeffs[m * ne_out + i * nc + j] = self.coeffs[m * ne + (r0 + i) * self.cols + c0 + j];
                }
            }
        }
        Ok(out)
    }

    /// Column-wise juxtaposition `(self other)`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.bands != other.bands || self.rows != other.rows {
            return Err(FourierError::DimensionMismatch("hstack of incompatible maps".into()));
        }
        let cols = self.cols + other.cols;
        let mut out = Self::zeros(&self.bands, &self.grid, self.rows, cols)?;
        for m in 0..self.num_modes() {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    out.coeffs[m * self.rows * cols + i * cols + j] = self.coeffs[m * self.entries() + i * self.cols + j];
                }
                for j in 0..other.cols {
                    out.coeffs[m * self.rows * cols + i * cols + self.cols + j] =
                        other.coeffs[m * other.entries() + i * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Pointwise matrix product, evaluated on a dealiasing grid and truncated to the wider band box.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows || self.bands.len() != other.bands.len() {
            return Err(FourierError::DimensionMismatch(format!(
                "product of {}x{} and {}x{} maps",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let bands: Vec<usize> = self.bands.iter().zip(&other.bands).map(|(&a, &b)| a.max(b)).collect();
        let fine: Vec<usize> = (0..bands.len())
            .map(|i| {
                let sum = self.bands[i] + other.bands[i];
                let needed = (2 * sum).max(sum + bands[i] + 1).next_power_of_two();
                needed.max(self.grid[i]).max(other.grid[i])
            })
            .collect();
        let a = self.eval_on(&fine)?;
        let b = other.eval_on(&fine)?;
        let prod = GridField {
            grid: fine.clone(),
            rows: self.rows,
            cols: other.cols,
            values: a.values.par_iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        };
        let projected = Self::from_samples(&prod, &bands)?;
        let grid: Vec<usize> = self.grid.iter().zip(&other.grid).map(|(&x, &y)| x.max(y)).collect();
        Ok(projected.with_grid(&grid)?)
    }

    /// Same coefficients with a different working grid.
    pub fn with_grid(mut self, grid: &[usize]) -> Result<Self> {
        check_grid(&self.bands, grid)?;
        self.grid = grid.to_vec();
        Ok(self)
    }

    /// Re-banded copy: truncates or zero-pads the coefficient box.
    pub fn with_bands(&self, bands: &[usize], grid: &[usize]) -> Result<Self> {
        if bands.len() != self.bands.len() {
            return Err(FourierError::DimensionMismatch("torus dimension differs".into()));
        }
        let mut out = Self::zeros(bands, grid, self.rows, self.cols)?;
        let ne = self.entries();
        for m in 0..out.num_modes() {
            let k = out.mode(m);
            if let Some(src) = self.index_of(&k) {
                out.coeffs[m * ne..(m + 1) * ne].copy_from_slice(&self.coeffs[src * ne..(src + 1) * ne]);
            }
        }
        Ok(out)
    }

    /// Diagonal Fourier multiplier `f̂_k ↦ m(k) f̂_k`.
    ///
    /// The multiplier must satisfy `m(−k) = conj(m(k))` for the result to stay real.
    pub fn multiply_modes<F>(&self, multiplier: F) -> Self
    where
        F: Fn(&[i64]) -> Complex64,
    {
        let mut out = self.clone();
        let ne = self.entries();
        for m in 0..self.num_modes() {
            let factor = multiplier(&self.mode(m));
            for e in 0..ne {
                out.coeffs[m * ne + e] *= factor;
            }
        }
        out
    }

    /// Exact spectral derivative `∂f/∂θ_axis`, acting as `f̂_k ↦ 2πi k_axis f̂_k`.
    pub fn partial_derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.torus_dim() {
            return Err(FourierError::InvalidAxis { axis, d: self.torus_dim() });
        }
        let mut out = self.clone();
        let ne = self.entries();
        for m in 0..self.num_modes() {
            let k = self.mode(m)[axis] as f64;
            let factor = Complex64::new(0.0, 2.0 * PI * k);
            for e in 0..ne {
                out.coeffs[m * ne + e] *= factor;
            }
        }
        Ok(out)
    }

    /// Lie derivative `𝔏_ω f = −Σ_i ω_i ∂f/∂θ_i`, acting as `f̂_k ↦ −2πi (k·ω) f̂_k`.
    pub fn lie_derivative(&self, omega: &[f64]) -> Result<Self> {
        if omega.len() != self.torus_dim() {
            return Err(FourierError::DimensionMismatch(format!(
                "frequency of length {} on a {}-torus",
                omega.len(),
                self.torus_dim()
            )));
        }
        let mut out = self.clone();
        let ne = self.entries();
        for m in 0..self.num_modes() {
            let kw: f64 = self.mode(m).iter().zip(omega).map(|(&k, &w)| k as f64 * w).sum();
            let factor = Complex64::new(0.0, -2.0 * PI * kw);
            for e in 0..ne {
                out.coeffs[m * ne + e] *= factor;
            }
        }
        Ok(out)
    }

    /// Derivative `Dv` of a column map `v: T^d → R^r` as an `r × d` map.
    pub fn jacobian(&self) -> Result<Self> {
        if self.cols != 1 {
            return Err(FourierError::DimensionMismatch("jacobian of a non-column map".into()));
        }
        let mut acc = self.partial_derivative(0)?;
        for axis in 1..self.torus_dim() {
            acc = acc.hstack(&self.partial_derivative(axis)?)?;
        }
        Ok(acc)
    }

    /// Translated map `θ ↦ f(θ + α)`.
    pub fn shift(&self, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != self.torus_dim() {
            return Err(FourierError::DimensionMismatch("shift of wrong length".into()));
        }
        let mut out = self.clone();
        let ne = self.entries();
        for m in 0..self.num_modes() {
            let phase: f64 = self.mode(m).iter().zip(alpha).map(|(&k, &a)| k as f64 * a).sum();
            let w = Complex64::from_polar(1.0, 2.0 * PI * phase);
            for e in 0..ne {
                out.coeffs[m * ne + e] *= w;
            }
        }
        Ok(out)
    }

    /// Average `⟨f⟩ = f̂_0`.
    pub fn average(&self) -> DMatrix<f64> {
        let zero = self.zero_index();
        let ne = self.entries();
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.coeffs[zero * ne + i * self.cols + j].re)
    }

    /// The map minus its average.
    pub fn zero_average(&self) -> Self {
        let mut out = self.clone();
        let zero = out.zero_index();
        let ne = out.entries();
        for e in 0..ne {
            out.coeffs[zero * ne + e] = Complex64::new(0.0, 0.0);
        }
        out
    }

    /// Entrywise majorants `Σ_k |f̂_k| e^{2π|k|₁ρ}`, summed in mode order.
    pub fn entry_majorants(&self, rho: f64) -> Result<DMatrix<f64>> {
        if !(rho >= 0.0) {
            return Err(FourierError::InvalidStrip { rho, delta: 0.0 });
        }
        let ne = self.entries();
        let mut acc = vec![0.0; ne];
        for m in 0..self.num_modes() {
            let k1: i64 = self.mode(m).iter().map(|k| k.abs()).sum();
            let w = (2.0 * PI * k1 as f64 * rho).exp();
            for (e, a) in acc.iter_mut().enumerate() {
                *a += self.coeffs[m * ne + e].norm() * w;
            }
        }
        if acc.iter().any(|a| !a.is_finite()) {
            return Err(FourierError::NormOverflow { rho });
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| acc[i * self.cols + j]))
    }

    /// `‖f‖_ρ`: majorant entries combined by the max-row-sum norm.
    pub fn strip_norm(&self, rho: f64) -> Result<StripNorm> {
        let a = self.entry_majorants(rho)?;
        Ok(StripNorm { rho, value: crate::linalg::row_sum_norm(&a) })
    }

    /// `‖f^⊤‖_ρ`: majorant entries combined by the max-column-sum norm.
    pub fn strip_norm_transpose(&self, rho: f64) -> Result<StripNorm> {
        let a = self.entry_majorants(rho)?;
        Ok(StripNorm { rho, value: crate::linalg::row_sum_norm(&a.transpose()) })
    }

    /// Shorthand for `strip_norm(rho)?.value`.
    pub fn norm(&self, rho: f64) -> Result<f64> {
        Ok(self.strip_norm(rho)?.value)
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }

    /// Fraction of the majorant norm carried by modes with some `|k_i| > N_i / 2`.
    pub fn tail_fraction(&self, rho: f64) -> Result<f64> {
        let total = self.norm(rho)?;
        if total == 0.0 {
            return Ok(0.0);
        }
        let mut tail = self.clone();
        let ne = self.entries();
        for m in 0..self.num_modes() {
            let k = self.mode(m);
            let inner = k.iter().zip(&self.bands).all(|(&ki, &n)| (ki.unsigned_abs() as usize) * 2 <= n);
            if inner {
                for e in 0..ne {
                    tail.coeffs[m * ne + e] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(tail.norm(rho)? / total)
    }

    pub fn to_json(&self) -> FourierMapJson {
        FourierMapJson {
            dims: [self.torus_dim(), self.rows, self.cols],
            bands: self.bands.clone(),
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_json(doc: &FourierMapJson) -> Result<Self> {
        let [d, rows, cols] = doc.dims;
        if doc.bands.len() != d {
            return Err(FourierError::Format(format!("{} bands for torus dimension {d}", doc.bands.len())));
        }
        let grid = if doc.grid.is_empty() { dealias_grid(&doc.bands) } else { doc.grid.clone() };
        let mut f = Self::zeros(&doc.bands, &grid, rows, cols)?;
        if doc.coeffs.len() != 2 * f.coeffs.len() {
            return Err(FourierError::Format(format!(
                "expected {} coefficient reals, found {}",
                2 * f.coeffs.len(),
                doc.coeffs.len()
            )));
        }
        for (c, pair) in f.coeffs.iter_mut().zip(doc.coeffs.chunks(2)) {
            *c = Complex64::new(pair[0], pair[1]);
        }
        if f.symmetry_defect() > SYMMETRY_TOL * (1.0 + f.max_coeff()) {
            return Err(FourierError::Format("coefficients are not conjugate symmetric".into()));
        }
        f.enforce_symmetry();
        Ok(f)
    }
}

/// Serialized form of a [`FourierMap`].
///
/// `coeffs` lists `(re, im)` pairs flattened, with `k` in row-major order over
/// the box `[−N_1, N_1] × … × [−N_d, N_d]` and, inside each mode, the matrix
/// entries in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierMapJson {
    pub dims: [usize; 3],
    pub bands: Vec<usize>,
    #[serde(default)]
    pub grid: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl Serialize for FourierMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FourierMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = FourierMapJson::deserialize(d)?;
        FourierMap::from_json(&doc).map_err(serde::de::Error::custom)
    }
}
