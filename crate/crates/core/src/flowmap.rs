//! Characteristics of a velocity field, semi-Lagrangian transport and the
//! renormalized transport residual.

use rayon::prelude::*;

use crate::fields::{wrap, PeriodicGrid, ScalarField, Stencil, VectorField};
use crate::trajectory::Snapshot;
use crate::{Error, Point, Result};

/// A velocity field on a time interval, with its divergence.
pub trait Velocity: Sync {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2];
    fn divergence(&self, t: f64, x: Point) -> f64;

    fn sample(&self, t: f64, x: Point) -> ([f64; 2], f64) {
        (self.velocity(t, x), self.divergence(t, x))
    }
}

/// Two grid velocities at `t0` and `t1`, linear in time, interpolated bicubically in space.
#[derive(Debug, Clone)]
pub struct VelocitySegment {
    t0: f64,
    t1: f64,
    u0: VectorField,
    u1: VectorField,
    div0: Vec<f64>,
    div1: Vec<f64>,
    frozen: bool,
}

impl VelocitySegment {
    pub fn new(t0: f64, u0: VectorField, t1: f64, u1: VectorField) -> Self {
        let div0 = u0.divergence().into_values();
        let div1 = u1.divergence().into_values();
        let frozen = u0 == u1;
        VelocitySegment { t0, t1, u0, u1, div0, div1, frozen }
    }

    /// The same field at both ends.
    pub fn frozen(t0: f64, t1: f64, u: VectorField) -> Self {
        let div = u.divergence().into_values();
        VelocitySegment { t0, t1, u0: u.clone(), u1: u, div0: div.clone(), div1: div, frozen: true }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.u0.grid()
    }

    pub fn max_speed(&self) -> f64 {
        self.u0.max_abs().max(self.u1.max_abs())
    }

    fn weight(&self, t: f64) -> f64 {
        if self.t1 > self.t0 {
            ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

impl Velocity for VelocitySegment {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        let s = Stencil::new(self.grid(), x);
        let w = if self.frozen { 0.0 } else { self.weight(t) };
        if w == 0.0 {
            return [s.apply(&self.u0.x), s.apply(&self.u0.y)];
        }
        [
            (1.0 - w) * s.apply(&self.u0.x) + w * s.apply(&self.u1.x),
            (1.0 - w) * s.apply(&self.u0.y) + w * s.apply(&self.u1.y),
        ]
    }

    fn divergence(&self, t: f64, x: Point) -> f64 {
        self.sample(t, x).1
    }

    fn sample(&self, t: f64, x: Point) -> ([f64; 2], f64) {
        let s = Stencil::new(self.grid(), x);
        let w = if self.frozen { 0.0 } else { self.weight(t) };
        let lerp = |a: &[f64], b: &[f64]| {
            let va = s.apply(a);
            if w == 0.0 {
                va
            } else {
                (1.0 - w) * va + w * s.apply(b)
            }
        };
        ([lerp(&self.u0.x, &self.u1.x), lerp(&self.u0.y, &self.u1.y)], lerp(&self.div0, &self.div1))
    }
}

/// A velocity given by closures, for analytic flows.
pub struct AnalyticVelocity<V, D> {
    pub velocity: V,
    pub divergence: D,
}

impl<V, D> Velocity for AnalyticVelocity<V, D>
where
    V: Fn(f64, Point) -> [f64; 2] + Sync,
    D: Fn(f64, Point) -> f64 + Sync,
{
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        (self.velocity)(t, x)
    }

    fn divergence(&self, t: f64, x: Point) -> f64 {
        (self.divergence)(t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicConfig {
    /// RK4 substeps per transport step.
    pub substeps: usize,
    /// Largest allowed displacement per substep, in domain units.
    pub max_displacement: f64,
}

impl CharacteristicConfig {
    /// One substep, displacement guard of half a grid cell.
    pub fn for_grid(grid: &PeriodicGrid) -> Self {
        CharacteristicConfig { substeps: 1, max_displacement: 0.5 * grid.h() }
    }

    /// Enough substeps that a flow of speed `max_speed` stays within the guard over `dt`.
    pub fn with_speed(self, max_speed: f64, dt: f64) -> Self {
        let needed = (max_speed * dt / (0.9 * self.max_displacement)).ceil() as usize;
        CharacteristicConfig { substeps: self.substeps.max(needed).max(1), ..self }
    }
}

/// Backward characteristic from `(t1, x)` to `t0`, with `int_{t0}^{t1} div u(s, X(s)) ds`
/// along it. The returned foot is not wrapped.
pub fn trace_back(vel: &impl Velocity, x: Point, t1: f64, t0: f64, cfg: &CharacteristicConfig) -> Result<(Point, f64)> {
    let steps = cfg.substeps.max(1);
    let dt = (t1 - t0) / steps as f64;
    let mut p = x;
    let mut t = t1;
    let (mut v_now, mut div_now) = vel.sample(t, p);
    let mut integral = 0.0;
    let add = |p: Point, k: [f64; 2], s: f64| [p[0] - s * k[0], p[1] - s * k[1]];
    for _ in 0..steps {
        let k1 = v_now;
        let k2 = vel.velocity(t - 0.5 * dt, add(p, k1, 0.5 * dt));
        let k3 = vel.velocity(t - 0.5 * dt, add(p, k2, 0.5 * dt));
        let k4 = vel.velocity(t - dt, add(p, k3, dt));
        let step =
            [(k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0, (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0];
        let next = add(p, step, dt);
        let displacement = (next[0] - p[0]).hypot(next[1] - p[1]);
        if displacement > cfg.max_displacement {
            return Err(Error::CflViolation { displacement, limit: cfg.max_displacement });
        }
        let (v_next, div_next) = vel.sample(t - dt, next);
        // Cubic Hermite midpoint of the path from the end velocities.
        let mid = [
            0.5 * (p[0] + next[0]) + dt / 8.0 * (v_next[0] - k1[0]),
            0.5 * (p[1] + next[1]) + dt / 8.0 * (v_next[1] - k1[1]),
        ];
        let div_mid = vel.divergence(t - 0.5 * dt, mid);
        integral += dt / 6.0 * (div_now + 4.0 * div_mid + div_next);
        p = next;
        t -= dt;
        v_now = v_next;
        div_now = div_next;
    }
    Ok((p, integral))
}

/// Foot of the backward characteristic, wrapped into `[0,1)^2`.
pub fn backward_foot(vel: &impl Velocity, x: Point, t1: f64, t0: f64, cfg: &CharacteristicConfig) -> Result<Point> {
    trace_back(vel, x, t1, t0, cfg).map(|(p, _)| wrap(p))
}

/// Forward RK4 image of `x` from `t0` to `t1`, not wrapped. Velocities are
/// sampled at unwrapped points, so they must be periodic.
pub fn forward_point(vel: &impl Velocity, x: Point, t0: f64, t1: f64, cfg: &CharacteristicConfig) -> Result<Point> {
    let steps = cfg.substeps.max(1);
    let dt = (t1 - t0) / steps as f64;
    let mut p = x;
    let mut t = t0;
    let add = |p: Point, k: [f64; 2], s: f64| [p[0] + s * k[0], p[1] + s * k[1]];
    for _ in 0..steps {
        let k1 = vel.velocity(t, p);
        let k2 = vel.velocity(t + 0.5 * dt, add(p, k1, 0.5 * dt));
        let k3 = vel.velocity(t + 0.5 * dt, add(p, k2, 0.5 * dt));
        let k4 = vel.velocity(t + dt, add(p, k3, dt));
        let step =
            [(k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0, (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0];
        let next = add(p, step, dt);
        let displacement = (next[0] - p[0]).hypot(next[1] - p[1]);
        if displacement > cfg.max_displacement {
            return Err(Error::CflViolation { displacement, limit: cfg.max_displacement });
        }
        p = next;
        t += dt;
    }
    Ok(p)
}

/// `rho_new(x) = rho_prev(X^{-1}(x)) exp(-int div u)` at every node.
///
/// A non-positive bicubic value is replaced by the smallest value in its
/// stencil, which keeps the density positive.
pub fn transport_density(
    rho_prev: &ScalarField,
    vel: &impl Velocity,
    t0: f64,
    dt: f64,
    cfg: &CharacteristicConfig,
) -> Result<ScalarField> {
    let grid = *rho_prev.grid();
    let values = rho_prev.values();
    let out: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (foot, integral) = trace_back(vel, grid.node(i), t0 + dt, t0, cfg)?;
            let s = Stencil::new(&grid, wrap(foot));
            let mut v = s.apply(values);
            if v <= 0.0 {
                v = s.min(values);
            }
            Ok(v * (-integral).exp())
        })
        .collect();
    ScalarField::new(grid, out?)
}

/// `chi_new(x) = chi_prev(X^{-1}(x))` with nearest-node lookup, so values stay in `{0,1}`.
pub fn transport_indicator_grid(
    chi_prev: &ScalarField,
    vel: &impl Velocity,
    t0: f64,
    dt: f64,
    cfg: &CharacteristicConfig,
) -> Result<ScalarField> {
    let grid = *chi_prev.grid();
    let n = grid.n() as f64;
    let out: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let foot = backward_foot(vel, grid.node(i), t0 + dt, t0, cfg)?;
            let ix = (foot[0] * n).round() as i64;
            let iy = (foot[1] * n).round() as i64;
            Ok(chi_prev.values()[grid.wrapped_index(ix, iy)])
        })
        .collect();
    ScalarField::new(grid, out?)
}

/// A scalar space-time test function with analytic derivatives.
pub trait ScalarTestFunction: Sync {
    fn value(&self, t: f64, x: Point) -> f64;
    fn time_derivative(&self, t: f64, x: Point) -> f64;
    fn gradient(&self, t: f64, x: Point) -> [f64; 2];

    /// Nodal value, time derivative and gradient components at time `t`.
    fn sample_grid(&self, grid: &PeriodicGrid, t: f64) -> [Vec<f64>; 4] {
        let pts: Vec<(f64, f64, [f64; 2])> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.node(i);
                (self.value(t, x), self.time_derivative(t, x), self.gradient(t, x))
            })
            .collect();
        [
            pts.iter().map(|p| p.0).collect(),
            pts.iter().map(|p| p.1).collect(),
            pts.iter().map(|p| p.2[0]).collect(),
            pts.iter().map(|p| p.2[1]).collect(),
        ]
    }
}

/// The test function identically equal to a constant.
#[derive(Debug, Clone, Copy)]
pub struct ConstantTest(pub f64);

impl ScalarTestFunction for ConstantTest {
    fn value(&self, _: f64, _: Point) -> f64 {
        self.0
    }
    fn time_derivative(&self, _: f64, _: Point) -> f64 {
        0.0
    }
    fn gradient(&self, _: f64, _: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// Residual of the renormalized equation for `b(chi, rho)` on a run of snapshots:
///
/// `[int b phi] - int int (b d_t phi + b u.grad phi + (b - rho d_rho b) div u phi)`,
/// trapezoidal in time over the snapshot times.
pub fn renormalized_residual<B, DB>(b: B, db_drho: DB, snapshots: &[Snapshot], phi: &impl ScalarTestFunction) -> f64
where
    B: Fn(f64, f64) -> f64 + Sync,
    DB: Fn(f64, f64) -> f64 + Sync,
{
    if snapshots.len() < 2 {
        return 0.0;
    }
    let per_snapshot: Vec<(f64, f64)> = snapshots
        .iter()
        .map(|s| {
            let grid = *s.rho.grid();
            let h2 = grid.h() * grid.h();
            let [p, pt, gx, gy] = phi.sample_grid(&grid, s.time);
            let div = s.u.divergence();
            let (rho, chi, div) = (s.rho.values(), s.chi.values(), div.values());
            let (mut held, mut flux) = (0.0, 0.0);
            for i in 0..grid.len() {
                let bv = b(chi[i], rho[i]);
                let corr = bv - rho[i] * db_drho(chi[i], rho[i]);
                held += bv * p[i];
                flux += bv * pt[i] + bv * (s.u.x[i] * gx[i] + s.u.y[i] * gy[i]) + corr * div[i] * p[i];
            }
            (h2 * held, h2 * flux)
        })
        .collect();
    let first = per_snapshot[0].0;
    let last = per_snapshot[per_snapshot.len() - 1].0;
    let mut integral = 0.0;
    for k in 1..snapshots.len() {
        let dt = snapshots[k].time - snapshots[k - 1].time;
        integral += 0.5 * dt * (per_snapshot[k - 1].1 + per_snapshot[k].1);
    }
    last - first - integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn cfg(g: &PeriodicGrid) -> CharacteristicConfig {
        CharacteristicConfig::for_grid(g)
    }

    #[test]
    fn zero_velocity_is_identity() {
        let g = grid(32);
        let seg = VelocitySegment::frozen(0.0, 0.1, VectorField::zeros(g));
        let x = [0.3, 0.7];
        assert_eq!(backward_foot(&seg, x, 0.1, 0.0, &cfg(&g)).unwrap(), x);
        let rho = ScalarField::from_fn(g, |p| 1.0 + 0.3 * (2.0 * PI * p[0]).sin());
        assert_eq!(transport_density(&rho, &seg, 0.0, 0.1, &cfg(&g)).unwrap(), rho);
        let chi = ScalarField::from_fn(g, |p| if p[0] < 0.5 { 1.0 } else { 0.0 });
        assert_eq!(transport_indicator_grid(&chi, &seg, 0.0, 0.1, &cfg(&g)).unwrap(), chi);
    }

    #[test]
    fn constant_translation_foot() {
        let g = grid(32);
        let seg = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |_| [0.3, -0.2]));
        let c = CharacteristicConfig { substeps: 4, max_displacement: 0.1 };
        let foot = backward_foot(&seg, [0.1, 0.9], 0.2, 0.0, &c).unwrap();
        assert!((foot[0] - 0.04).abs() < 1e-14 && (foot[1] - 0.94).abs() < 1e-14);
    }

    #[test]
    fn shear_characteristics_are_straight() {
        let vel = AnalyticVelocity {
            velocity: |_: f64, p: Point| [(2.0 * PI * p[1]).sin(), 0.0],
            divergence: |_: f64, _: Point| 0.0,
        };
        let c = CharacteristicConfig { substeps: 1, max_displacement: 0.2 };
        let foot = backward_foot(&vel, [0.5, 0.25], 0.1, 0.0, &c).unwrap();
        assert!((foot[0] - 0.4).abs() < 1e-15 && (foot[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cfl_guard_trips() {
        let g = grid(32);
        let seg = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |_| [1.0, 0.0]));
        let err = backward_foot(&seg, [0.5, 0.5], 0.1, 0.0, &cfg(&g)).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
        let auto = cfg(&g).with_speed(1.0, 0.1);
        assert!(backward_foot(&seg, [0.5, 0.5], 0.1, 0.0, &auto).is_ok());
    }

    #[test]
    fn density_scales_by_exponential_of_divergence() {
        let vel = AnalyticVelocity {
            velocity: |_: f64, _: Point| [0.0, 0.0],
            divergence: |_: f64, _: Point| 2f64.ln() / 0.5,
        };
        let g = grid(16);
        let rho = ScalarField::constant(g, 3.0);
        let out = transport_density(&rho, &vel, 0.0, 0.5, &cfg(&g)).unwrap();
        assert!(out.values().iter().all(|v| (v - 1.5).abs() < 1e-14));
    }

    #[test]
    fn lattice_shift_moves_indicator_exactly() {
        let g = grid(16);
        let h = g.h();
        let seg = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |_| [1.0, 0.0]));
        let chi = ScalarField::from_fn(g, |p| if p[0] < 0.3 && p[1] < 0.6 { 1.0 } else { 0.0 });
        let c = CharacteristicConfig { substeps: 2, max_displacement: h };
        let out = transport_indicator_grid(&chi, &seg, 0.0, 2.0 * h, &c).unwrap();
        for i in 0..g.len() {
            let (ix, iy) = (i / 16, i % 16);
            assert_eq!(out.values()[i], chi.values()[g.wrapped_index(ix as i64 - 2, iy as i64)]);
        }
    }

    #[test]
    fn checkerboard_stays_binary_under_shear() {
        let g = grid(32);
        let seg = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |p| [0.3 * (2.0 * PI * p[1]).sin(), 0.0]));
        let chi = ScalarField::from_fn(g, |p| (((p[0] * 32.0).round() + (p[1] * 32.0).round()) as i64 % 2) as f64);
        let out = transport_indicator_grid(&chi, &seg, 0.0, 0.01, &cfg(&g)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn rk4_composition_is_high_order() {
        // Rotation about the centre; foot after one step vs two half steps.
        let vel = AnalyticVelocity {
            velocity: |_: f64, p: Point| [-(p[1] - 0.5), p[0] - 0.5],
            divergence: |_: f64, _: Point| 0.0,
        };
        let c1 = CharacteristicConfig { substeps: 1, max_displacement: 1.0 };
        let c2 = CharacteristicConfig { substeps: 2, max_displacement: 1.0 };
        let x = [0.8, 0.5];
        let mut last = f64::INFINITY;
        for dt in [0.2, 0.1, 0.05] {
            let a = trace_back(&vel, x, dt, 0.0, &c1).unwrap().0;
            let b = trace_back(&vel, x, dt, 0.0, &c2).unwrap().0;
            let diff = (a[0] - b[0]).hypot(a[1] - b[1]);
            assert!(diff < last / 16.0 || last.is_infinite(), "{diff} vs {last}");
            last = diff;
        }
    }

    #[test]
    fn divergence_integral_along_compressive_flow() {
        // u = -a (x - 1/2) in x only: div = -a, so rho grows by e^{a dt}.
        let a = 0.8;
        let vel = AnalyticVelocity {
            velocity: move |_: f64, p: Point| [-a * (p[0] - 0.5), 0.0],
            divergence: move |_: f64, _: Point| -a,
        };
        let c = CharacteristicConfig { substeps: 3, max_displacement: 1.0 };
        let (_, integral) = trace_back(&vel, [0.7, 0.2], 0.25, 0.0, &c).unwrap();
        assert!((integral + a * 0.25).abs() < 1e-14);
    }
}
