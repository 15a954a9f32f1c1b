//! Periodic grid fields on `[0,1)^2`, spectral calculus and interpolation.
//!
//! Nodes are stored row-major with `y` fastest: node `(ix, iy)` sits at
//! `(ix h, iy h)` and has index `ix * n + iy`.

mod interp;
pub mod spectral;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

pub use interp::Stencil;

use crate::rheology::SymTensor2;
use crate::{Error, Point, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size must be a power of two >= 16, got {n}")));
        }
        Ok(PeriodicGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.n + iy
    }

    /// Index of the node `(ix, iy)` taken modulo `n`.
    pub fn wrapped_index(&self, ix: i64, iy: i64) -> usize {
        let n = self.n as i64;
        self.index(ix.rem_euclid(n) as usize, iy.rem_euclid(n) as usize)
    }

    pub fn node(&self, i: usize) -> Point {
        let h = self.h();
        [(i / self.n) as f64 * h, (i % self.n) as f64 * h]
    }

    /// Signed wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn mode(&self, i: usize) -> (i64, i64) {
        (self.wavenumber(i / self.n), self.wavenumber(i % self.n))
    }

    /// Bin index of the signed mode `(kx, ky)`.
    pub fn mode_index(&self, kx: i64, ky: i64) -> usize {
        self.wrapped_index(kx, ky)
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        let half = self.n / 2;
        i / self.n == half || i % self.n == half
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }
}

/// Wraps a point into `[0,1)^2`.
pub fn wrap(p: Point) -> Point {
    let w = |v: f64| {
        let r = v.rem_euclid(1.0);
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    };
    [w(p[0]), w(p[1])]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: PeriodicGrid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: PeriodicGrid,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

fn check_len(grid: &PeriodicGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::InvalidParameter(format!("field has {len} values but the grid has {} nodes", grid.len())));
    }
    Ok(())
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(Point) -> f64 + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(grid.node(i))).collect();
        ScalarField { grid, values }
    }

    pub fn from_spectrum(grid: PeriodicGrid, coeffs: &[Complex64]) -> Self {
        ScalarField { grid, values: spectral::inverse(&grid, coeffs) }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        spectral::forward(&self.grid, &self.values)
    }

    pub fn integrate(&self) -> f64 {
        let h = self.grid.h();
        h * h * self.values.iter().sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    /// Discrete `L^1` distance `h^2 sum |f - g|`.
    pub fn l1_distance(&self, other: &ScalarField) -> f64 {
        let h = self.grid.h();
        h * h * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn gradient(&self) -> VectorField {
        let c = self.spectrum();
        let gx = spectral::apply_symbol(&self.grid, &c, |kx, _| spectral::ik(kx));
        let gy = spectral::apply_symbol(&self.grid, &c, |_, ky| spectral::ik(ky));
        VectorField { grid: self.grid, x: spectral::inverse(&self.grid, &gx), y: spectral::inverse(&self.grid, &gy) }
    }

    pub fn laplacian(&self) -> ScalarField {
        let c = self.spectrum();
        let l = spectral::apply_symbol(&self.grid, &c, |kx, ky| {
            Complex64::new(-TWO_PI * TWO_PI * (kx * kx + ky * ky) as f64, 0.0)
        });
        ScalarField::from_spectrum(self.grid, &l)
    }

    pub fn project_bandlimit(&self, band: usize) -> ScalarField {
        let c = band_limit(&self.grid, self.spectrum(), band);
        ScalarField::from_spectrum(self.grid, &c)
    }

    pub fn interpolate(&self, p: Point) -> f64 {
        Stencil::new(&self.grid, p).apply(&self.values)
    }
}

/// Zeroes every mode with `max(|kx|, |ky|) > band`.
pub fn band_limit(grid: &PeriodicGrid, mut coeffs: Vec<Complex64>, band: usize) -> Vec<Complex64> {
    let band = band as i64;
    for (i, c) in coeffs.iter_mut().enumerate() {
        let (kx, ky) = grid.mode(i);
        if kx.abs().max(ky.abs()) > band {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    coeffs
}

impl VectorField {
    pub fn new(grid: PeriodicGrid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_len(&grid, x.len())?;
        check_len(&grid, y.len())?;
        Ok(VectorField { grid, x, y })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        VectorField { grid, x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(Point) -> [f64; 2] + Sync) -> Self {
        let v: Vec<[f64; 2]> = (0..grid.len()).into_par_iter().map(|i| f(grid.node(i))).collect();
        VectorField { grid, x: v.iter().map(|a| a[0]).collect(), y: v.iter().map(|a| a[1]).collect() }
    }

    pub fn from_spectra(grid: PeriodicGrid, cx: &[Complex64], cy: &[Complex64]) -> Self {
        VectorField { grid, x: spectral::inverse(&grid, cx), y: spectral::inverse(&grid, cy) }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn at(&self, i: usize) -> [f64; 2] {
        [self.x[i], self.y[i]]
    }

    pub fn spectra(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        rayon::join(|| spectral::forward(&self.grid, &self.x), || spectral::forward(&self.grid, &self.y))
    }

    pub fn component(&self, c: usize) -> ScalarField {
        let values = if c == 0 { self.x.clone() } else { self.y.clone() };
        ScalarField { grid: self.grid, values }
    }

    pub fn divergence(&self) -> ScalarField {
        let (cx, cy) = self.spectra();
        let dx = spectral::apply_symbol(&self.grid, &cx, |kx, _| spectral::ik(kx));
        let dy = spectral::apply_symbol(&self.grid, &cy, |_, ky| spectral::ik(ky));
        let sum: Vec<Complex64> = dx.iter().zip(&dy).map(|(a, b)| a + b).collect();
        ScalarField::from_spectrum(self.grid, &sum)
    }

    /// `(grad v + grad v^T) / 2`.
    pub fn sym_gradient(&self) -> SymTensorField {
        let g = &self.grid;
        let (cx, cy) = self.spectra();
        let dxx = spectral::apply_symbol(g, &cx, |kx, _| spectral::ik(kx));
        let dyy = spectral::apply_symbol(g, &cy, |_, ky| spectral::ik(ky));
        let dxy = {
            let a = spectral::apply_symbol(g, &cx, |_, ky| spectral::ik(ky));
            let b = spectral::apply_symbol(g, &cy, |kx, _| spectral::ik(kx));
            a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect::<Vec<_>>()
        };
        SymTensorField {
            grid: *g,
            xx: spectral::inverse(g, &dxx),
            xy: spectral::inverse(g, &dxy),
            yy: spectral::inverse(g, &dyy),
        }
    }

    /// Spectral multiplier `delta |2 pi k|^{4m}`, the diagonal form of the
    /// pairing `delta int Lap^m v . Lap^m phi`.
    pub fn hyper_apply(&self, m: u32, delta: f64) -> VectorField {
        let (cx, cy) = self.spectra();
        let symbol = |kx: i64, ky: i64| {
            let k2 = TWO_PI * TWO_PI * (kx * kx + ky * ky) as f64;
            Complex64::new(delta * k2.powi(2 * m as i32), 0.0)
        };
        let hx = spectral::apply_symbol(&self.grid, &cx, symbol);
        let hy = spectral::apply_symbol(&self.grid, &cy, symbol);
        VectorField::from_spectra(self.grid, &hx, &hy)
    }

    pub fn project_bandlimit(&self, band: usize) -> VectorField {
        let (cx, cy) = self.spectra();
        let cx = band_limit(&self.grid, cx, band);
        let cy = band_limit(&self.grid, cy, band);
        VectorField::from_spectra(self.grid, &cx, &cy)
    }

    pub fn interpolate(&self, p: Point) -> [f64; 2] {
        let s = Stencil::new(&self.grid, p);
        [s.apply(&self.x), s.apply(&self.y)]
    }

    /// Discrete inner product `h^2 sum v . w`.
    pub fn inner(&self, other: &VectorField) -> f64 {
        let h = self.grid.h();
        let s: f64 = (0..self.grid.len()).map(|i| self.x[i] * other.x[i] + self.y[i] * other.y[i]).sum();
        h * h * s
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |m, i| m.max(self.x[i].hypot(self.y[i])))
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField {
            grid: self.grid,
            x: self.x.iter().map(|v| v * s).collect(),
            y: self.y.iter().map(|v| v * s).collect(),
        }
    }
}

impl SymTensorField {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn at(&self, i: usize) -> SymTensor2 {
        SymTensor2::new(self.xx[i], self.xy[i], self.yy[i])
    }

    pub fn from_tensors(grid: PeriodicGrid, t: &[SymTensor2]) -> Result<Self> {
        check_len(&grid, t.len())?;
        Ok(SymTensorField {
            grid,
            xx: t.iter().map(|d| d.xx).collect(),
            xy: t.iter().map(|d| d.xy).collect(),
            yy: t.iter().map(|d| d.yy).collect(),
        })
    }

    pub fn trace(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.xx.iter().zip(&self.yy).map(|(a, b)| a + b).collect() }
    }
}
