//! The density-weighted Galerkin mass operator and its inverse.

use rustfft::num_complex::Complex64;

use super::Functional;
use crate::fields::{band_limit, spectral, PeriodicGrid, ScalarField, VectorField};
use crate::{Error, Result};

/// Relative residual at which the conjugate-gradient iteration stops.
pub const SOLVE_TOL: f64 = 1e-10;

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.re * q.re + p.im * q.im).sum()
}

/// `Pi_N (rho w)` in coefficient space.
fn apply(grid: &PeriodicGrid, rho: &[f64], w: &[Complex64], band: usize) -> Vec<Complex64> {
    let nodal = spectral::inverse(grid, w);
    let weighted: Vec<f64> = nodal.iter().zip(rho).map(|(a, r)| a * r).collect();
    band_limit(grid, spectral::forward(grid, &weighted), band)
}

/// Number of modes per component in the band.
pub fn band_modes(band: usize) -> usize {
    (2 * band + 1) * (2 * band + 1)
}

/// Hermitian part `(c_k + conj c_{-k}) / 2`, the coefficients of a real field.
fn hermitian(grid: &PeriodicGrid, c: &[Complex64]) -> Vec<Complex64> {
    (0..c.len())
        .map(|i| {
            let (kx, ky) = grid.mode(i);
            0.5 * (c[i] + c[grid.mode_index(-kx, -ky)].conj())
        })
        .collect()
}

fn conjugate_gradient(grid: &PeriodicGrid, rho: &[f64], g: &[Complex64], band: usize) -> Result<Vec<Complex64>> {
    let g = band_limit(grid, hermitian(grid, g), band);
    let gnorm = dot(&g, &g).sqrt();
    if gnorm == 0.0 {
        return Ok(g);
    }
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let mut x: Vec<Complex64> = g.iter().map(|c| c / mean).collect();
    let ax = apply(grid, rho, &x, band);
    let mut r: Vec<Complex64> = g.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let limit = 10 * band_modes(band);
    for _ in 0..limit {
        if rr.sqrt() <= SOLVE_TOL * gnorm {
            return Ok(x);
        }
        let ap = apply(grid, rho, &p, band);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    if rr.sqrt() <= SOLVE_TOL * gnorm {
        return Ok(x);
    }
    Err(Error::IterationLimit { iterations: limit, residual: rr.sqrt() / gnorm })
}

/// The band-limited `w` with `int rho w . phi = g(phi)` for every mode `phi`
/// in the band, by conjugate gradients on the weighted mass form.
pub fn solve_weighted_projection(rho: &ScalarField, g: &Functional, band: usize) -> Result<VectorField> {
    let grid = *rho.grid();
    if !(rho.min() > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weighted projection needs a positive density, min is {}",
            rho.min()
        )));
    }
    let (wx, wy) = rayon::join(
        || conjugate_gradient(&grid, rho.values(), &g.x, band),
        || conjugate_gradient(&grid, rho.values(), &g.y, band),
    );
    Ok(VectorField::from_spectra(grid, &wx?, &wy?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(32).unwrap()
    }

    fn smooth(g: PeriodicGrid) -> VectorField {
        VectorField::from_fn(g, |p| {
            let (x, y) = (2.0 * PI * p[0], 2.0 * PI * p[1]);
            [x.sin() * (2.0 * y).cos() + 0.3, (3.0 * x).cos() - 0.5 * (x + y).sin()]
        })
    }

    fn max_diff(a: &VectorField, b: &VectorField) -> f64 {
        (0..a.x.len()).fold(0.0, |m, i| m.max((a.x[i] - b.x[i]).abs()).max((a.y[i] - b.y[i]).abs()))
    }

    #[test]
    fn unit_weight_returns_the_riesz_representer() {
        let g = grid();
        let v = smooth(g);
        let f = Functional::riesz(&v, 8);
        let w = solve_weighted_projection(&ScalarField::constant(g, 1.0), &f, 8).unwrap();
        assert!(max_diff(&w, &v) < 1e-13);
    }

    #[test]
    fn constant_weight_scales_the_solution() {
        let g = grid();
        let v = smooth(g);
        let f = Functional::riesz(&v, 8);
        let one = solve_weighted_projection(&ScalarField::constant(g, 1.0), &f, 8).unwrap();
        let two = solve_weighted_projection(&ScalarField::constant(g, 2.0), &f, 8).unwrap();
        assert!(max_diff(&two, &one.scale(0.5)) < 1e-14);
    }

    #[test]
    fn manufactured_weighted_solution_is_recovered() {
        let g = grid();
        let rho = ScalarField::from_fn(g, |p| 1.0 + 0.5 * (2.0 * PI * p[0]).sin());
        let w_star = smooth(g);
        // The functional phi -> int rho w* . phi, by direct nodal quadrature.
        let r = rho.values();
        let weighted = VectorField::new(
            g,
            (0..g.len()).map(|i| r[i] * w_star.x[i]).collect(),
            (0..g.len()).map(|i| r[i] * w_star.y[i]).collect(),
        )
        .unwrap();
        let f = Functional::riesz(&weighted, 8);
        let w = solve_weighted_projection(&rho, &f, 8).unwrap();
        assert!(max_diff(&w, &w_star) < 1e-8, "{}", max_diff(&w, &w_star));
    }

    #[test]
    fn zero_functional_gives_zero_and_vacuum_is_rejected() {
        let g = grid();
        let f = Functional::zeros(&g);
        let w = solve_weighted_projection(&ScalarField::constant(g, 1.5), &f, 4).unwrap();
        assert_eq!(w.max_abs(), 0.0);
        assert!(solve_weighted_projection(&ScalarField::constant(g, 0.0), &f, 4).is_err());
    }
}
