//! Steklov time averages of the stored velocity and the Jensen property of
//! the discrete time mollifier.

use super::testfn::TestFunction;
use crate::fields::{ScalarField, SymTensorField};
use crate::rheology::SymTensor2;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

fn smoothstep(s: f64) -> (f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0)
    } else {
        (s * s * s * (10.0 - 15.0 * s + 6.0 * s * s), 30.0 * s * s * (1.0 - s) * (1.0 - s))
    }
}

/// Smooth cutoff on `[t0, t1]`: zero outside, one on `[t0 + eps, t1 - eps]`.
/// Returns the value and the derivative.
pub fn cutoff(t: f64, t0: f64, t1: f64, eps: f64) -> (f64, f64) {
    if t <= t0 || t >= t1 {
        return (0.0, 0.0);
    }
    let (a, da) = smoothstep((t - t0) / eps);
    let (b, db) = smoothstep((t1 - t) / eps);
    (a * b, (da * b - a * db) / eps)
}

/// Weights `c_j` with `f(t) = sum_j c_j f(t_j)` for the piecewise linear
/// interpolant of samples at `times`; zero outside the sampled range.
fn hat_weights(times: &[f64], t: f64, scale: f64, c: &mut [f64]) {
    let n = times.len();
    if t < times[0] || t > times[n - 1] || scale == 0.0 {
        return;
    }
    let j = (times.partition_point(|&s| s <= t).max(1) - 1).min(n - 2);
    let s = (t - times[j]) / (times[j + 1] - times[j]);
    c[j] += scale * (1.0 - s);
    c[j + 1] += scale * s;
}

/// Simpson panels per unit kernel half-width.
const PANELS: usize = 128;

/// `[u]_{h,eps} = xi (eta_{-h} * eta_h * (xi u))` at each stored time, with `u`
/// linear in time between snapshots, rescaled into the potentials' domain.
pub fn steklov_mollify(traj: &Trajectory, h_time: f64, eps_cut: f64) -> Result<TestFunction> {
    traj.validate()?;
    let times = traj.times();
    let (t0, t1) = (times[0], *times.last().unwrap());
    if !(h_time > 0.0 && h_time < eps_cut && eps_cut < 0.5 * (t1 - t0)) {
        return Err(Error::InvalidParameter(format!(
            "Steklov average needs 0 < h < eps < tau/2, got h = {h_time}, eps = {eps_cut}, tau = {}",
            t1 - t0
        )));
    }
    let n = times.len();
    let xi = |t: f64| cutoff(t, t0, t1, eps_cut).0;
    let ds = h_time / PANELS as f64;
    let grid = *traj.grid();
    let mut values = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for &t in &times {
        // Triangle kernel (h - |s|) / h^2 for the value, and the jump kernel of
        // its derivative, both against w = xi u.
        let mut c = vec![0.0; n];
        let mut dc = vec![0.0; n];
        for q in 0..=2 * PANELS {
            let s = -h_time + q as f64 * ds;
            let simpson = (if q == 0 || q == 2 * PANELS {
                1.0
            } else if q % 2 == 1 {
                4.0
            } else {
                2.0
            }) * ds
                / 3.0;
            let tq = t - s;
            let w = xi(tq);
            hat_weights(&times, tq, simpson * w * (h_time - s.abs()) / (h_time * h_time), &mut c);
        }
        // d/dt (K * w)(t) = (int_t^{t+h} w - int_{t-h}^t w) / h^2.
        for q in 0..=PANELS {
            let s = q as f64 * ds;
            let simpson = (if q == 0 || q == PANELS {
                1.0
            } else if q % 2 == 1 {
                4.0
            } else {
                2.0
            }) * ds
                / 3.0;
            hat_weights(&times, t + s, simpson * xi(t + s) / (h_time * h_time), &mut dc);
            hat_weights(&times, t - s, -simpson * xi(t - s) / (h_time * h_time), &mut dc);
        }
        let (x, dx) = cutoff(t, t0, t1, eps_cut);
        let combine = |coef: &[f64], comp: usize| {
            let mut out = vec![0.0; grid.len()];
            for (j, &cj) in coef.iter().enumerate() {
                if cj != 0.0 {
                    let u = if comp == 0 { &traj.snapshots[j].u.x } else { &traj.snapshots[j].u.y };
                    for (o, v) in out.iter_mut().zip(u) {
                        *o += cj * v;
                    }
                }
            }
            out
        };
        let mut val = Vec::with_capacity(2);
        let mut rate = Vec::with_capacity(2);
        for comp in 0..2 {
            let avg = combine(&c, comp);
            let davg = combine(&dc, comp);
            val.push(ScalarField::new(grid, avg.iter().map(|a| x * a).collect())?);
            rate.push(ScalarField::new(grid, avg.iter().zip(&davg).map(|(a, b)| dx * a + x * b).collect())?);
        }
        values.push(val);
        rates.push(rate);
    }
    TestFunction::sampled(0, times, values, rates)?.make_admissible(&traj.params.potentials)
}

/// Largest `F(K D)(t_i) - (K F(D))(t_i)` over nodes and times, where `K` is the
/// normalized discrete triangle average of half-width `h_time` over the
/// sample times. Nonpositive up to roundoff for convex `f`.
pub fn jensen_mollification_check(
    f: impl Fn(&SymTensor2) -> f64,
    times: &[f64],
    fields: &[SymTensorField],
    h_time: f64,
) -> Result<f64> {
    if times.len() != fields.len() || times.is_empty() {
        return Err(Error::InvalidParameter("one field per time is required".into()));
    }
    let len = fields[0].xx.len();
    if fields.iter().any(|d| d.xx.len() != len) {
        return Err(Error::InvalidParameter("fields differ in size".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    for (i, &ti) in times.iter().enumerate() {
        let mut w: Vec<(usize, f64)> = times
            .iter()
            .enumerate()
            .filter_map(|(j, &tj)| {
                let k = h_time - (ti - tj).abs();
                (k > 0.0).then_some((j, k))
            })
            .collect();
        let total: f64 = w.iter().map(|p| p.1).sum();
        for p in &mut w {
            p.1 /= total;
        }
        for node in 0..len {
            let di = fields[i].at(node);
            let fi = f(&di);
            let mut mixed = di;
            let mut avg = fi;
            for &(j, wj) in &w {
                if j != i {
                    let dj = fields[j].at(node);
                    mixed += wj * (dj - di);
                    avg += wj * (f(&dj) - fi);
                }
            }
            worst = worst.max(f(&mixed) - avg);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_smooth_and_has_a_plateau() {
        let (t0, t1, e) = (0.0, 1.0, 0.2);
        assert_eq!(cutoff(0.5, t0, t1, e), (1.0, 0.0));
        assert_eq!(cutoff(0.2, t0, t1, e).0, 1.0);
        assert_eq!(cutoff(0.0, t0, t1, e).0, 0.0);
        for t in [0.05, 0.13, 0.9] {
            let fd = (cutoff(t + 1e-7, t0, t1, e).0 - cutoff(t - 1e-7, t0, t1, e).0) / 2e-7;
            assert!((fd - cutoff(t, t0, t1, e).1).abs() < 1e-6);
        }
    }

    #[test]
    fn hat_weights_reproduce_linear_data() {
        let times = [0.0, 0.1, 0.3, 0.35, 1.0];
        for t in [0.0, 0.05, 0.2, 0.33, 0.99, 1.0] {
            let mut c = vec![0.0; 5];
            hat_weights(&times, t, 1.0, &mut c);
            let v: f64 = c.iter().zip(&times).map(|(a, b)| a * (2.0 * b - 1.0)).sum();
            assert!((v - (2.0 * t - 1.0)).abs() < 1e-15);
        }
    }
}
