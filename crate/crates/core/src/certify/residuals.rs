//! Weak-form residuals of a stored trajectory against test functions, with
//! nodal (spectrally exact) sums in space. In time the stored data is taken
//! linear between snapshots. Terms linear in a separable test are integrated
//! exactly against its profile; everything else uses the trapezoid rule.

use super::testfn::{gradient_fields, TestFunction, TestSample};
use crate::fields::PeriodicGrid;
use crate::interface::{first_variation, DiscreteVarifold};
use crate::rheology::Phase;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// A residual and the size of the terms it balances; tolerances scale with
/// the latter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub magnitude: f64,
}

/// Per-snapshot quantities shared by all test functions.
pub(crate) struct Precomputed<'a> {
    pub traj: &'a Trajectory,
    pub grid: PeriodicGrid,
    pub div: Vec<Vec<f64>>,
    pub pressure: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub varifold: Vec<DiscreteVarifold>,
}

fn phase_at(chi: f64) -> Phase {
    Phase::from_indicator(chi)
}

impl<'a> Precomputed<'a> {
    pub fn new(traj: &'a Trajectory) -> Result<Self> {
        traj.validate()?;
        let grid = *traj.grid();
        let h2 = grid.h() * grid.h();
        let p = &traj.params;
        let mut out = Precomputed {
            traj,
            grid,
            div: Vec::new(),
            pressure: Vec::new(),
            energy: Vec::new(),
            dissipation: Vec::new(),
            varifold: Vec::new(),
        };
        for s in &traj.snapshots {
            let (r, c) = (s.rho.values(), s.chi.values());
            let mut pressure = Vec::with_capacity(r.len());
            let mut internal = 0.0;
            let mut kinetic = 0.0;
            for i in 0..r.len() {
                let ph = phase_at(c[i]);
                pressure.push(p.pressures.pressure(ph, r[i])?);
                internal += p.pressures.potential(ph, r[i])?;
                kinetic += 0.5 * r[i] * (s.u.x[i] * s.u.x[i] + s.u.y[i] * s.u.y[i]);
            }
            let d = s.u.sym_gradient();
            let mut diss = 0.0;
            for i in 0..r.len() {
                diss += p.potentials.eval(phase_at(c[i]), &d.at(i));
            }
            out.div.push(s.u.divergence().into_values());
            out.pressure.push(pressure);
            out.energy.push(h2 * (kinetic + internal) + p.kappa * s.perimeter());
            out.dissipation.push(h2 * diss);
            out.varifold.push(s.varifold());
        }
        Ok(out)
    }

    fn h2(&self) -> f64 {
        self.grid.h() * self.grid.h()
    }

    fn check_shape(&self, phi: &TestFunction, components: usize) -> Result<()> {
        if phi.components() != components {
            return Err(Error::InvalidParameter(format!(
                "test {} has {} components, {components} expected",
                phi.id,
                phi.components()
            )));
        }
        let times = self.traj.times();
        if phi.times() != times.as_slice() {
            return Err(Error::InvalidParameter(format!("test {} is not sampled on the trajectory times", phi.id)));
        }
        Ok(())
    }
}

/// `[A]_0^tau_k - int_0^tau_k B` for every stored `k >= 1`, given the
/// boundary values `a`, the integrals of `B` over each snapshot interval and
/// the per-time magnitude of the integrand's terms.
fn accumulate(times: &[f64], a: &[f64], b_int: &[f64], b_mag: &[f64]) -> Vec<Residual> {
    let mut out = Vec::with_capacity(times.len().saturating_sub(1));
    let (mut ib, mut im) = (0.0, 0.0);
    for k in 1..times.len() {
        ib += b_int[k - 1];
        im += 0.5 * (times[k] - times[k - 1]) * (b_mag[k - 1] + b_mag[k]);
        out.push(Residual { value: a[k] - a[0] - ib, magnitude: a[k].abs() + a[0].abs() + im });
    }
    out
}

fn trapezoid(times: &[f64], b: &[f64]) -> Vec<f64> {
    (1..times.len()).map(|k| 0.5 * (times[k] - times[k - 1]) * (b[k - 1] + b[k])).collect()
}

/// Interval integrals of `psi' R + psi S` for a separable test with the
/// spatial pairings `R`, `S` linear between snapshots.
fn product_integrals(phi: &TestFunction, times: &[f64], r: &[f64], s: &[f64]) -> Vec<f64> {
    (1..times.len())
        .map(|k| {
            let (w, dw) = phi.interval_weights(k).expect("separable test");
            dw[0] * r[k - 1] + dw[1] * r[k] + w[0] * s[k - 1] + w[1] * s[k]
        })
        .collect()
}

/// Transport or mass residuals of a scalar test against the carried
/// quantity `q` (the indicator or the density).
fn scalar_series(pre: &Precomputed, phi: &TestFunction, indicator: bool) -> Result<Vec<Residual>> {
    pre.check_shape(phi, 1)?;
    let h2 = pre.h2();
    let n = pre.traj.snapshots.len();
    let times = pre.traj.times();
    let spatial = phi.spatial_sample();
    let (mut a, mut b, mut m) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut r_sp, mut s_sp) = (vec![0.0; n], vec![0.0; n]);
    // (value, rate, flux + div) pairings of the quantity with a sample.
    let pair = |k: usize, value: &[f64], rate: &[f64], grad: &[Vec<f64>; 2]| {
        let s = &pre.traj.snapshots[k];
        let q = if indicator { s.chi.values() } else { s.rho.values() };
        let (mut t_val, mut t_rate, mut t_flux, mut t_div) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..q.len() {
            t_val += q[i] * value[i];
            t_rate += q[i] * rate[i];
            t_flux += q[i] * (s.u.x[i] * grad[0][i] + s.u.y[i] * grad[1][i]);
            if indicator {
                t_div += q[i] * pre.div[k][i] * value[i];
            }
        }
        (h2 * t_val, h2 * t_rate, h2 * t_flux, h2 * t_div)
    };
    for k in 0..n {
        let TestSample { value, rate, grad } = phi.sample(k);
        let (val, rt, flux, div) = pair(k, &value[0], &rate[0], &grad[0]);
        a[k] = val;
        b[k] = rt + flux + div;
        m[k] = rt.abs() + flux.abs() + div.abs();
        if let Some(sp) = &spatial {
            let (val, _, flux, div) = pair(k, &sp.value[0], &sp.rate[0], &sp.grad[0]);
            r_sp[k] = val;
            s_sp[k] = flux + div;
        }
    }
    let b_int = match spatial {
        Some(_) => product_integrals(phi, &times, &r_sp, &s_sp),
        None => trapezoid(&times, &b),
    };
    Ok(accumulate(&times, &a, &b_int, &m))
}

pub(crate) fn transport_series(pre: &Precomputed, phi: &TestFunction) -> Result<Vec<Residual>> {
    scalar_series(pre, phi, true)
}

pub(crate) fn mass_series(pre: &Precomputed, phi: &TestFunction) -> Result<Vec<Residual>> {
    scalar_series(pre, phi, false)
}

/// Value of the momentum-energy inequality at every stored `tau_k`, `k >= 1`.
pub(crate) fn momentum_energy_series(pre: &Precomputed, phi: &TestFunction) -> Result<Vec<Residual>> {
    pre.check_shape(phi, 2)?;
    let p = &pre.traj.params;
    let h2 = pre.h2();
    let n = pre.traj.snapshots.len();
    let times = pre.traj.times();
    let spatial = phi.spatial_sample();
    // (momentum, rate, convection + pressure - surface) pairings with a sample.
    let linear = |k: usize, sample: &TestSample| {
        let s = &pre.traj.snapshots[k];
        let divphi = sample.divergence();
        let r = s.rho.values();
        let (ux, uy) = (&s.u.x, &s.u.y);
        let g = &sample.grad;
        let (mut mom, mut rate, mut conv, mut pres) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..r.len() {
            let (mx, my) = (r[i] * ux[i], r[i] * uy[i]);
            mom += mx * sample.value[0][i] + my * sample.value[1][i];
            rate += mx * sample.rate[0][i] + my * sample.rate[1][i];
            conv += mx * (ux[i] * g[0][0][i] + uy[i] * g[0][1][i]) + my * (ux[i] * g[1][0][i] + uy[i] * g[1][1][i]);
            pres += pre.pressure[k][i] * divphi[i];
        }
        let surface = if p.kappa > 0.0 && !pre.varifold[k].atoms.is_empty() {
            let gf = gradient_fields(pre.grid, sample);
            p.kappa
                * first_variation(&pre.varifold[k], |x| {
                    [
                        [gf[0][0].interpolate(x), gf[0][1].interpolate(x)],
                        [gf[1][0].interpolate(x), gf[1][1].interpolate(x)],
                    ]
                })
        } else {
            0.0
        };
        (h2 * mom, h2 * rate, h2 * conv, h2 * pres, surface)
    };
    let (mut a, mut b, mut m) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut nonlinear, mut r_sp, mut s_sp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (k, s) in pre.traj.snapshots.iter().enumerate() {
        let sample = phi.sample(k);
        let c = s.chi.values();
        let mut f_phi = 0.0;
        for (i, d) in sample.sym_gradient().iter().enumerate() {
            let f = p.potentials.eval(phase_at(c[i]), d);
            if !f.is_finite() {
                return Err(Error::InadmissibleTest(format!(
                    "test {}: F(D phi) is infinite at node {i}, t = {}",
                    phi.id, s.time
                )));
            }
            f_phi += f;
        }
        let f_phi = h2 * f_phi;
        let (mom, rate, conv, pres, surface) = linear(k, &sample);
        let f_u = pre.dissipation[k];
        a[k] = pre.energy[k] - mom;
        nonlinear[k] = f_phi - f_u;
        b[k] = f_phi - f_u - (rate + conv + pres) + surface;
        m[k] = f_phi.abs() + f_u.abs() + rate.abs() + conv.abs() + pres.abs() + surface.abs();
        if let Some(sp) = &spatial {
            let (mom, _, conv, pres, surface) = linear(k, sp);
            r_sp[k] = -mom;
            s_sp[k] = surface - conv - pres;
        }
    }
    let b_int = match spatial {
        Some(_) => trapezoid(&times, &nonlinear)
            .into_iter()
            .zip(product_integrals(phi, &times, &r_sp, &s_sp))
            .map(|(x, y)| x + y)
            .collect(),
        None => trapezoid(&times, &b),
    };
    let series = accumulate(&times, &a, &b_int, &m);
    // value = int B - [A], the negative of the accumulated residual.
    Ok(series.into_iter().map(|r| Residual { value: -r.value, magnitude: r.magnitude }).collect())
}

fn at_time(series: Vec<Residual>, traj: &Trajectory, tau: f64) -> Result<Residual> {
    let times = traj.times();
    if tau == times[0] {
        return Ok(Residual { value: 0.0, magnitude: 0.0 });
    }
    match times.iter().position(|&t| t == tau) {
        Some(k) => Ok(series[k - 1]),
        None => Err(Error::InvalidParameter(format!("tau = {tau} is not a stored snapshot time"))),
    }
}

/// Signed residual of the weak transport equation for the indicator.
pub fn residual_transport(traj: &Trajectory, phi: &TestFunction, tau: f64) -> Result<Residual> {
    let pre = Precomputed::new(traj)?;
    at_time(transport_series(&pre, phi)?, traj, tau)
}

/// Signed residual of the weak continuity equation.
pub fn residual_mass(traj: &Trajectory, phi: &TestFunction, tau: f64) -> Result<Residual> {
    let pre = Precomputed::new(traj)?;
    at_time(mass_series(&pre, phi)?, traj, tau)
}

/// Left minus right side of the momentum-energy inequality; nonnegative for
/// a dissipative solution. The model is taken from the trajectory.
pub fn inequality_momentum_energy(traj: &Trajectory, phi: &TestFunction, tau: f64) -> Result<Residual> {
    phi.check_admissible(&traj.params.potentials)?;
    let pre = Precomputed::new(traj)?;
    at_time(momentum_energy_series(&pre, phi)?, traj, tau)
}
