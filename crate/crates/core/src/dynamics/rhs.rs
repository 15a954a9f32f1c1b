//! The band-limited momentum functional.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::{Model, StepConfig};
use crate::fields::{spectral, PeriodicGrid, ScalarField, SymTensorField, VectorField};
use crate::interface::DiscreteVarifold;
use crate::rheology::{Phase, SymTensor2};
use crate::Result;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A linear functional on band-limited vector fields, stored as its values
/// `x[k] = F(e_x e^{-2 pi i k.x})` and `y[k] = F(e_y e^{-2 pi i k.x})` in
/// FFT layout. Modes outside the band are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl Functional {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Functional { x: vec![ZERO; grid.len()], y: vec![ZERO; grid.len()] }
    }

    /// `int v . phi` as a functional of `phi`, restricted to the band.
    pub fn riesz(v: &VectorField, band: usize) -> Self {
        let g = *v.grid();
        let (x, y) = v.spectra();
        Functional { x: crate::fields::band_limit(&g, x, band), y: crate::fields::band_limit(&g, y, band) }
    }

    /// Value on a real field.
    pub fn pair(&self, phi: &VectorField) -> f64 {
        let (px, py) = phi.spectra();
        let sx: f64 = self.x.iter().zip(&px).map(|(a, b)| (a * b.conj()).re).sum();
        let sy: f64 = self.y.iter().zip(&py).map(|(a, b)| (a * b.conj()).re).sum();
        sx + sy
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `self + s other`.
    pub fn add_scaled(&self, s: f64, other: &Functional) -> Functional {
        let comb = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| p + s * q).collect();
        Functional { x: comb(&self.x, &other.x), y: comb(&self.y, &other.y) }
    }
}

/// Nodal regularized stress `(D - prox D) / eps` with the phase read from `chi`.
pub fn stress_field(model: &Model, chi: &ScalarField, d: &SymTensorField, eps: f64) -> Result<SymTensorField> {
    let grid = *chi.grid();
    let out: Result<Vec<SymTensor2>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let phase = Phase::from_indicator(chi.values()[i]);
            Ok(model.potentials.prox(phase, &d.at(i), eps)?.stress)
        })
        .collect();
    SymTensorField::from_tensors(grid, &out?)
}

fn nodal_pressure(model: &Model, chi: &ScalarField, rho: &ScalarField) -> Result<Vec<f64>> {
    (0..rho.grid().len())
        .into_par_iter()
        .map(|i| model.pressures.pressure(Phase::from_indicator(chi.values()[i]), rho.values()[i]))
        .collect()
}

/// `kappa sum_j w_j (I - z_j z_j) : grad phi(x_j)` for every mode `phi` in the band.
pub fn surface_functional(grid: &PeriodicGrid, v: &DiscreteVarifold, kappa: f64, band: usize) -> Functional {
    let mut f = Functional::zeros(grid);
    if kappa == 0.0 || v.atoms.is_empty() {
        return f;
    }
    let nb = band as i64;
    let width = 2 * band + 1;
    // Per atom, e^{-2 pi i k x_j} for k = -band..=band in each direction.
    let phases = |c: usize| -> Vec<Vec<Complex64>> {
        v.atoms
            .iter()
            .map(|a| (-nb..=nb).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * a.x[c])).collect())
            .collect()
    };
    let ex = phases(0);
    let ey = phases(1);
    let proj: Vec<[f64; 4]> = v
        .atoms
        .iter()
        .map(|a| {
            let z = a.z;
            [a.w * (1.0 - z[0] * z[0]), -a.w * z[0] * z[1], -a.w * z[0] * z[1], a.w * (1.0 - z[1] * z[1])]
        })
        .collect();
    let rows: Vec<Vec<(usize, Complex64, Complex64)>> = (0..width)
        .into_par_iter()
        .map(|a| {
            let kx = a as i64 - nb;
            (0..width)
                .map(|b| {
                    let ky = b as i64 - nb;
                    let mut sx = ZERO;
                    let mut sy = ZERO;
                    for j in 0..v.atoms.len() {
                        let e = ex[j][a] * ey[j][b];
                        let p = proj[j];
                        sx += e * (p[0] * kx as f64 + p[1] * ky as f64);
                        sy += e * (p[2] * kx as f64 + p[3] * ky as f64);
                    }
                    let g = Complex64::new(0.0, -2.0 * PI * kappa);
                    (grid.mode_index(kx, ky), g * sx, g * sy)
                })
                .collect()
        })
        .collect();
    for (i, sx, sy) in rows.into_iter().flatten() {
        f.x[i] = sx;
        f.y[i] = sy;
    }
    f
}

/// The Galerkin momentum functional
/// `phi -> int rho u (x) u : grad phi + int p div phi - int S : D phi
///          - kappa <dV; phi> - delta int Lap^m u . Lap^m phi`
/// on every mode with `max(|kx|, |ky|) <= band`.
///
/// The surface term enters with the sign that makes `kappa * perimeter`
/// an energy: a circle at rest is pushed inward.
pub fn assemble_rhs(
    model: &Model,
    cfg: &StepConfig,
    rho: &ScalarField,
    chi: &ScalarField,
    varifold: Option<&DiscreteVarifold>,
    u: &VectorField,
) -> Result<Functional> {
    let stress = stress_field(model, chi, &u.sym_gradient(), cfg.eps)?;
    assemble_with_stress(model, cfg, rho, chi, varifold, u, &stress)
}

pub(super) fn assemble_with_stress(
    model: &Model,
    cfg: &StepConfig,
    rho: &ScalarField,
    chi: &ScalarField,
    varifold: Option<&DiscreteVarifold>,
    u: &VectorField,
    stress: &SymTensorField,
) -> Result<Functional> {
    let grid = *rho.grid();
    let pressure = nodal_pressure(model, chi, rho)?;
    let r = rho.values();
    let mxx: Vec<f64> = (0..grid.len()).map(|i| r[i] * u.x[i] * u.x[i]).collect();
    let mxy: Vec<f64> = (0..grid.len()).map(|i| r[i] * u.x[i] * u.y[i]).collect();
    let myy: Vec<f64> = (0..grid.len()).map(|i| r[i] * u.y[i] * u.y[i]).collect();
    let nodal = [&mxx, &mxy, &myy, &pressure, &stress.xx, &stress.xy, &stress.yy, &u.x, &u.y];
    let hat: Vec<Vec<Complex64>> = nodal.par_iter().map(|v| spectral::forward(&grid, v)).collect();
    let (mxx, mxy, myy, p) = (&hat[0], &hat[1], &hat[2], &hat[3]);
    let (sxx, sxy, syy, ux, uy) = (&hat[4], &hat[5], &hat[6], &hat[7], &hat[8]);

    let band = cfg.band as i64;
    let m = cfg.hyper_order as i32;
    let terms: Vec<(Complex64, Complex64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (kx, ky) = grid.mode(i);
            if kx.abs().max(ky.abs()) > band || grid.is_nyquist(i) {
                return (ZERO, ZERO);
            }
            let (ax, ay) = (spectral::ik(kx), spectral::ik(ky));
            let k2 = (2.0 * PI).powi(2) * (kx * kx + ky * ky) as f64;
            let hyper = cfg.delta * k2.powi(2 * m);
            let fx = -(ax * mxx[i] + ay * mxy[i]) - ax * p[i] + (ax * sxx[i] + ay * sxy[i]) - hyper * ux[i];
            let fy = -(ax * mxy[i] + ay * myy[i]) - ay * p[i] + (ax * sxy[i] + ay * syy[i]) - hyper * uy[i];
            (fx, fy)
        })
        .collect();
    let mut f = Functional { x: terms.iter().map(|t| t.0).collect(), y: terms.iter().map(|t| t.1).collect() };
    if let Some(v) = varifold {
        let s = surface_functional(&grid, v, cfg.kappa, cfg.band);
        f = f.add_scaled(-1.0, &s);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::{first_variation, MarkerCurve};
    use crate::rheology::{DissipationPotential, MixturePotential};
    use crate::thermo::{MixturePressure, PressureLaw};

    fn model() -> Model {
        let f = DissipationPotential::quadratic(0.1, 0.05).unwrap();
        let p = PressureLaw::isothermal(2.0).unwrap();
        Model { potentials: MixturePotential::single(f), pressures: MixturePressure::new(p.clone(), p) }
    }

    fn cfg(kappa: f64) -> StepConfig {
        StepConfig { kappa, ..StepConfig::new(1e-3, 8, 1.0) }
    }

    fn grid() -> PeriodicGrid {
        PeriodicGrid::new(32).unwrap()
    }

    #[test]
    fn equilibrium_has_zero_rhs() {
        let g = grid();
        let rho = ScalarField::constant(g, 1.3);
        let chi = ScalarField::constant(g, 1.0);
        let f = assemble_rhs(&model(), &cfg(0.0), &rho, &chi, None, &VectorField::zeros(g)).unwrap();
        assert!(f.max_abs() < 1e-14, "{}", f.max_abs());
    }

    #[test]
    fn constant_velocity_has_zero_rhs() {
        let g = grid();
        let rho = ScalarField::constant(g, 0.8);
        let chi = ScalarField::constant(g, 1.0);
        let u = VectorField::from_fn(g, |_| [0.7, -0.4]);
        let f = assemble_rhs(&model(), &cfg(0.0), &rho, &chi, None, &u).unwrap();
        assert!(f.max_abs() < 1e-14);
        // Direct quadrature of int rho U (x) U : grad phi for a real mode.
        let phi = VectorField::from_fn(g, |p| [(2.0 * PI * (p[0] + 2.0 * p[1])).sin(), (2.0 * PI * p[1]).cos()]);
        let gx = phi.component(0).gradient();
        let gy = phi.component(1).gradient();
        let h2 = g.h() * g.h();
        let direct: f64 = (0..g.len())
            .map(|i| {
                let uu = [[0.49, -0.28], [-0.28, 0.16]];
                0.8 * (uu[0][0] * gx.x[i] + uu[0][1] * gx.y[i] + uu[1][0] * gy.x[i] + uu[1][1] * gy.y[i])
            })
            .sum::<f64>()
            * h2;
        assert!(direct.abs() < 1e-13);
        assert!(f.pair(&phi).abs() < 1e-13);
    }

    #[test]
    fn static_circle_feels_only_surface_tension() {
        let g = grid();
        let kappa = 0.3;
        let c = MarkerCurve::circle([0.5, 0.5], 0.25, 256, 2.0 * PI * 0.25 / 256.0).unwrap();
        let chi = c.rasterize(&g);
        let rho = ScalarField::constant(g, 1.0);
        let v = c.varifold();
        let f = assemble_rhs(&model(), &cfg(kappa), &rho, &chi, Some(&v), &VectorField::zeros(g)).unwrap();
        for (a, b) in [(1.0, 0.0), (2.0, 1.0), (-3.0, 2.0)] {
            let arg = move |p: [f64; 2]| 2.0 * PI * (a * p[0] + b * p[1]);
            let phi = VectorField::from_fn(g, |p| [arg(p).cos(), 0.5 * arg(p).sin()]);
            let grad = |p: [f64; 2]| {
                let (s, co) = arg(p).sin_cos();
                let w = 2.0 * PI;
                [[-s * w * a, -s * w * b], [0.5 * co * w * a, 0.5 * co * w * b]]
            };
            let expected = -kappa * first_variation(&v, grad);
            assert!((f.pair(&phi) - expected).abs() < 1e-12 * expected.abs().max(1.0), "{a} {b}");
        }
        let s = surface_functional(&g, &v, kappa, 8);
        assert!(f.add_scaled(1.0, &s).max_abs() < 1e-15);
        // The radial field x - c gains momentum inward.
        let radial = VectorField::from_fn(g, |p| {
            let (a, b) = ((2.0 * PI * (p[0] - 0.5)).sin(), (2.0 * PI * (p[1] - 0.5)).sin());
            [a / (2.0 * PI), b / (2.0 * PI)]
        });
        assert!(f.pair(&radial) < 0.0);
    }
}
