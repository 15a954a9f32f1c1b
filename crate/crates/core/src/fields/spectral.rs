use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::PeriodicGrid;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

fn transpose(n: usize, data: &mut [Complex64]) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn transform_2d(n: usize, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(n, data);
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(n, data);
}

/// Fourier coefficients `c_k = int f e^{-2 pi i k.x} dx` of nodal values,
/// stored in FFT order with the same layout as the nodes.
pub fn forward(grid: &PeriodicGrid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.n();
    let scale = 1.0 / (n * n) as f64;
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
    transform_2d(n, &mut data, &plans(n).0);
    data
}

/// Nodal values of the real part of the trigonometric sum with the given coefficients.
pub fn inverse(grid: &PeriodicGrid, coeffs: &[Complex64]) -> Vec<f64> {
    let n = grid.n();
    let mut data = coeffs.to_vec();
    transform_2d(n, &mut data, &plans(n).1);
    data.into_iter().map(|c| c.re).collect()
}

/// Multiplies each coefficient by `symbol(kx, ky)`; Nyquist rows and
/// columns are zeroed since their derivative is not real.
pub fn apply_symbol(
    grid: &PeriodicGrid,
    coeffs: &[Complex64],
    symbol: impl Fn(i64, i64) -> Complex64 + Sync,
) -> Vec<Complex64> {
    coeffs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            if grid.is_nyquist(i) {
                Complex64::new(0.0, 0.0)
            } else {
                let (kx, ky) = grid.mode(i);
                c * symbol(kx, ky)
            }
        })
        .collect()
}

/// `2 pi i k` for one wavenumber component.
pub fn ik(k: i64) -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI * k as f64)
}
