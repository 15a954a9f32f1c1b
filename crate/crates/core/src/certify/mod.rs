//! Residual checks of the weak solution clauses on a stored trajectory:
//! transport of the indicator, mass conservation, the momentum-energy
//! inequality, varifold compatibility and pointwise bounds.
//!
//! Each residual is compared with `C_c (h + dt) M`, where `M` is the size of
//! the terms the residual balances and `dt` the largest snapshot spacing.

mod bounds;
mod calibrate;
mod mollify;
mod residuals;
mod testfn;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use bounds::{bounds_check, BoundKind, BoundViolation, BoundsReport, DIVERGENCE_SLACK, ENVELOPE_SLACK};
pub use calibrate::{calibration_ratios, calibration_trajectories};
pub use mollify::{cutoff, jensen_mollification_check, steklov_mollify};
pub use residuals::{inequality_momentum_energy, residual_mass, residual_transport, Residual};
pub use testfn::{random_scalar, random_vector, TestFunction, TestSample, TimeProfile, PROFILE_KNOTS};

use crate::interface::compatibility_residual;
use crate::rheology::Phase;
use crate::trajectory::Trajectory;
use crate::{Point, Result};
use residuals::Precomputed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    Transport,
    Mass,
    MomentumEnergy,
    Compatibility,
    Bounds,
}

impl Clause {
    pub fn label(self) -> &'static str {
        match self {
            Clause::Transport => "transport",
            Clause::Mass => "mass",
            Clause::MomentumEnergy => "momentum-energy",
            Clause::Compatibility => "compatibility",
            Clause::Bounds => "bounds",
        }
    }
}

/// Constants `C_c` of the tolerance model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub transport: f64,
    pub mass: f64,
    pub momentum_energy: f64,
    /// Absolute, per unit varifold weight.
    pub compatibility: f64,
}

impl Tolerances {
    /// Four times the worst ratio observed on the calibration scenarios with
    /// 50 tests from seed 0, rounded up; see [`calibration_ratios`]. The
    /// calibration runs never violate the energy inequality, so that constant
    /// is a floor of `0.05`, which still leaves room for the Moreau-Yosida
    /// gap `F - F^eps`. Compatibility is absolute.
    pub const CALIBRATED: Tolerances =
        Tolerances { transport: 13.0, mass: 1.6e-4, momentum_energy: 0.05, compatibility: 1e-10 };
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::CALIBRATED
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub test_id: usize,
    pub tau: f64,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseReport {
    pub clause: Clause,
    pub constant: f64,
    pub entries: Vec<Entry>,
}

impl ClauseReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.pass).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub n_tests: usize,
    pub seed: u64,
    pub h: f64,
    pub dt: f64,
    pub clauses: Vec<ClauseReport>,
    pub bounds: BoundsReport,
    pub verdict: bool,
}

impl ResidualReport {
    pub fn clause(&self, c: Clause) -> Option<&ClauseReport> {
        self.clauses.iter().find(|r| r.clause == c)
    }

    pub fn failing_clauses(&self) -> Vec<Clause> {
        self.clauses.iter().filter(|c| !c.pass()).map(|c| c.clause).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "verdict: {}", if self.verdict { "pass" } else { "fail" });
        let _ = writeln!(s, "tests: {}  seed: {}  h: {:e}  dt: {:e}", self.n_tests, self.seed, self.h, self.dt);
        for c in &self.clauses {
            let _ = writeln!(s, "\n[{}]", c.clause.label());
            let _ = writeln!(s, "constant: {:e}", c.constant);
            let _ = writeln!(s, "checks: {}  failures: {}", c.entries.len(), c.failures());
            let worst = c
                .entries
                .iter()
                .filter(|e| e.tol > 0.0)
                .map(|e| match c.clause {
                    Clause::MomentumEnergy => (-e.residual).max(0.0) / e.tol,
                    _ => e.residual.abs() / e.tol,
                })
                .fold(0.0, f64::max);
            let _ = writeln!(s, "worst residual/tol: {worst:.3e}");
            let _ = writeln!(s, "status: {}", if c.pass() { "pass" } else { "fail" });
            if let Some(e) = c.entries.iter().find(|e| !e.pass) {
                let _ = writeln!(
                    s,
                    "first failure: test {} at tau {:e}: residual {:e}, tol {:e}",
                    e.test_id, e.tau, e.residual, e.tol
                );
            }
        }
        if let Some(m) = self.bounds.divergence_margin {
            let _ = writeln!(s, "\ndivergence margin: {m:e}");
        }
        for v in &self.bounds.violations {
            let _ = writeln!(
                s,
                "bound violation: {} at snapshot {} (t = {:e}), node {}: value {:e}, limit {:e}",
                v.kind.label(),
                v.snapshot,
                v.time,
                v.node,
                v.value,
                v.limit
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("clause,test_id,tau,residual,tol,pass\n");
        for c in &self.clauses {
            for e in &c.entries {
                let _ = writeln!(
                    s,
                    "{},{},{:e},{:e},{:e},{}",
                    c.clause.label(),
                    e.test_id,
                    e.tau,
                    e.residual,
                    e.tol,
                    e.pass
                );
            }
        }
        s
    }
}

/// Smallest amplitude of random vector tests relative to the peak speed.
const MIN_AMPLITUDE: f64 = 0.05;

/// Fields tested against the varifold compatibility relation.
fn compatibility_fields() -> [fn(Point) -> [f64; 2]; 4] {
    use std::f64::consts::TAU;
    [
        |_| [1.0, 0.0],
        |_| [0.0, 1.0],
        |p| [(TAU * p[1]).sin(), (TAU * p[0]).cos()],
        |p| [(TAU * (p[0] + p[1])).cos(), (TAU * (p[0] - 2.0 * p[1])).sin()],
    ]
}

/// The largest trace bound when both phases declare one.
pub fn declared_trace_bound(traj: &Trajectory) -> Option<f64> {
    let p = &traj.params.potentials;
    match (p.potential(Phase::One).trace_bound(), p.potential(Phase::Two).trace_bound()) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    }
}

/// Draws the test suite of [`certify_all`]: `n_tests` scalar and `n_tests`
/// admissible vector functions.
pub fn test_suite(traj: &Trajectory, n_tests: usize, seed: u64) -> Result<Vec<(TestFunction, TestFunction)>> {
    traj.validate()?;
    let grid = *traj.grid();
    let times = traj.times();
    let cutoff = (traj.params.band / 2).max(1);
    let speed = traj.snapshots.iter().fold(0.0f64, |m, s| m.max(s.u.max_abs()));
    let speed = if speed > 0.0 { speed } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_tests);
    for id in 0..n_tests {
        let scalar = random_scalar(id, grid, &times, cutoff, &mut rng);
        let vector = random_vector(id, grid, &times, cutoff, &mut rng);
        let amp = rng.random_range(MIN_AMPLITUDE..1.0) * speed;
        out.push((scalar, vector.scaled(amp).make_admissible(&traj.params.potentials)?));
    }
    Ok(out)
}

/// Largest `|residual|` of the transport and mass clauses over `n_tests`
/// scalar tests of spatial cutoff `cutoff` and all stored times. The tests
/// depend only on `seed`, `cutoff` and the time span, so runs of one scenario
/// at different resolutions see the same functions.
pub fn max_scalar_residuals(traj: &Trajectory, n_tests: usize, seed: u64, cutoff: usize) -> Result<(f64, f64)> {
    let pre = Precomputed::new(traj)?;
    let grid = *traj.grid();
    let times = traj.times();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tests: Vec<TestFunction> =
        (0..n_tests).map(|id| random_scalar(id, grid, &times, cutoff.max(1), &mut rng)).collect();
    let worst = |s: &[Residual]| s.iter().fold(0.0f64, |m, r| m.max(r.value.abs()));
    tests
        .par_iter()
        .map(|phi| Ok((worst(&residuals::transport_series(&pre, phi)?), worst(&residuals::mass_series(&pre, phi)?))))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1))))
}

/// [`certify_with`] at the calibrated tolerances.
pub fn certify_all(traj: &Trajectory, n_tests: usize, seed: u64) -> Result<ResidualReport> {
    certify_with(traj, n_tests, seed, &Tolerances::CALIBRATED)
}

pub fn certify_with(traj: &Trajectory, n_tests: usize, seed: u64, tol: &Tolerances) -> Result<ResidualReport> {
    let pre = Precomputed::new(traj)?;
    let times = traj.times();
    let h = traj.grid().h();
    let dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let scale = h + dt;
    let suite = test_suite(traj, n_tests, seed)?;
    type Series = (Vec<Residual>, Vec<Residual>, Vec<Residual>);
    let results: Vec<Series> = suite
        .par_iter()
        .map(|(sc, vc)| {
            Ok((
                residuals::transport_series(&pre, sc)?,
                residuals::mass_series(&pre, sc)?,
                residuals::momentum_energy_series(&pre, vc)?,
            ))
        })
        .collect::<Result<_>>()?;

    let equality = |clause: Clause, constant: f64, pick: fn(&Series) -> &Vec<Residual>| {
        let mut entries = Vec::new();
        for (id, r) in results.iter().enumerate() {
            for (k, res) in pick(r).iter().enumerate() {
                let t = constant * scale * res.magnitude;
                entries.push(Entry {
                    test_id: id,
                    tau: times[k + 1],
                    residual: res.value,
                    tol: t,
                    pass: res.value.abs() <= t,
                });
            }
        }
        ClauseReport { clause, constant, entries }
    };
    let mut clauses =
        vec![equality(Clause::Transport, tol.transport, |r| &r.0), equality(Clause::Mass, tol.mass, |r| &r.1)];
    let mut me = Vec::new();
    for (id, r) in results.iter().enumerate() {
        for (k, res) in r.2.iter().enumerate() {
            let t = tol.momentum_energy * scale * res.magnitude;
            me.push(Entry { test_id: id, tau: times[k + 1], residual: res.value, tol: t, pass: res.value >= -t });
        }
    }
    clauses.push(ClauseReport { clause: Clause::MomentumEnergy, constant: tol.momentum_energy, entries: me });

    if traj.params.kappa > 0.0 {
        let mut entries = Vec::new();
        for (k, s) in traj.snapshots.iter().enumerate() {
            if let Some(c) = &s.curve {
                let t = tol.compatibility * pre.varifold[k].total_weight().max(1.0);
                for (id, f) in compatibility_fields().into_iter().enumerate() {
                    let r = compatibility_residual(&pre.varifold[k], c, f);
                    entries.push(Entry { test_id: id, tau: s.time, residual: r, tol: t, pass: r.abs() <= t });
                }
            }
        }
        clauses.push(ClauseReport { clause: Clause::Compatibility, constant: tol.compatibility, entries });
    }

    let bounds = bounds_check(traj, declared_trace_bound(traj), traj.params.rho_lo, traj.params.rho_hi);
    let entries = bounds
        .excess
        .iter()
        .zip(&times)
        .enumerate()
        .map(|(k, (&e, &t))| {
            let pass = !bounds.violations.iter().any(|v| v.snapshot == k);
            Entry { test_id: 0, tau: t, residual: e, tol: 0.0, pass }
        })
        .collect();
    clauses.push(ClauseReport { clause: Clause::Bounds, constant: 0.0, entries });

    let verdict = clauses.iter().all(ClauseReport::pass);
    Ok(ResidualReport { n_tests, seed, h, dt, clauses, bounds, verdict })
}

/// Copy of the trajectory with the velocity, hence the momentum, multiplied
/// by `factor` at stored times `t >= t_from`.
pub fn scale_momentum_after(traj: &Trajectory, t_from: f64, factor: f64) -> Trajectory {
    let mut out = traj.clone();
    for s in out.snapshots.iter_mut().filter(|s| s.time >= t_from) {
        s.u = s.u.scale(factor);
    }
    out
}
