//! Faedo-Galerkin momentum solver, time stepping and the energy ledger.

mod hypothesis;
mod rhs;
mod solve;

use std::f64::consts::PI;

pub use hypothesis::{hypothesis_check, HypothesisReport, Regime};
pub use rhs::{assemble_rhs, stress_field, surface_functional, Functional};
pub use solve::{band_modes, solve_weighted_projection, SOLVE_TOL};

use crate::fields::{PeriodicGrid, ScalarField, SymTensorField, VectorField};
use crate::flowmap::{transport_density, CharacteristicConfig, VelocitySegment};
use crate::interface::MarkerCurve;
use crate::rheology::{MixturePotential, Phase};
use crate::thermo::MixturePressure;
use crate::trajectory::{RunParameters, Snapshot, Trajectory};
use crate::{Error, Result};

/// Default Moreau parameter.
pub const DEFAULT_EPS: f64 = 1e-3;
/// Default hyperviscosity order (`m > 2d` for `d = 2`).
pub const DEFAULT_HYPER_ORDER: u32 = 5;

/// Constitutive laws of the two phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub potentials: MixturePotential,
    pub pressures: MixturePressure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Galerkin cutoff: modes with `max(|kx|, |ky|) <= band`.
    pub band: usize,
    pub eps: f64,
    pub delta: f64,
    pub hyper_order: u32,
    pub kappa: f64,
    pub t_end: f64,
}

impl StepConfig {
    /// Defaults: `eps = 1e-3`, `m = 5`, `delta` from [`StepConfig::default_delta`], no surface tension.
    pub fn new(dt: f64, band: usize, t_end: f64) -> Self {
        StepConfig {
            dt,
            band,
            eps: DEFAULT_EPS,
            delta: Self::default_delta(band, DEFAULT_HYPER_ORDER),
            hyper_order: DEFAULT_HYPER_ORDER,
            kappa: 0.0,
            t_end,
        }
    }

    /// `1e-8 (2 pi N)^{-4m}`, which damps only the top of the band.
    pub fn default_delta(band: usize, m: u32) -> f64 {
        1e-8 * (2.0 * PI * band.max(1) as f64).powi(-4 * m as i32)
    }

    pub fn validate(&self, grid: &PeriodicGrid) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad(format!("delta must be nonnegative, got {}", self.delta));
        }
        if self.delta > 0.0 && self.hyper_order < 5 {
            return bad(format!("hyperviscosity order must be at least 5, got {}", self.hyper_order));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return bad(format!("kappa must be nonnegative, got {}", self.kappa));
        }
        if self.band == 0 || 3 * self.band > grid.n() {
            return bad(format!("band {} must lie in 1..={} for n = {}", self.band, grid.n() / 3, grid.n()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub kinetic: f64,
    pub internal: f64,
    pub interface: f64,
    pub dissipated_cum: f64,
    pub hyper_cum: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.kinetic + self.internal + self.interface
    }
}

/// Where phase one sits initially.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Uniform(Phase),
    Curve(MarkerCurve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub step: usize,
    pub rho: ScalarField,
    pub chi: ScalarField,
    pub curve: Option<MarkerCurve>,
    pub u: VectorField,
    pub ledger: EnergyLedger,
    pub initial_energy: f64,
}

/// One row of the per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub time: f64,
    pub kinetic: f64,
    pub internal: f64,
    pub interface: f64,
    pub dissipated_cum: f64,
    pub hyper_cum: f64,
    pub balance_residual: f64,
    pub mass: f64,
    pub max_div_u: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub perimeter: f64,
}

fn check_density(rho: &ScalarField) -> Result<()> {
    if rho.values().iter().all(|&r| r.is_finite() && r > 0.0) {
        Ok(())
    } else {
        Err(Error::NumericFailure(format!("density not positive and finite (min {})", rho.min())))
    }
}

/// Kinetic, internal and interface energy of a state.
fn energies(
    model: &Model,
    kappa: f64,
    rho: &ScalarField,
    chi: &ScalarField,
    u: &VectorField,
    curve: Option<&MarkerCurve>,
) -> Result<(f64, f64, f64)> {
    let h2 = rho.grid().h().powi(2);
    let r = rho.values();
    let kinetic = 0.5 * h2 * (0..r.len()).map(|i| r[i] * (u.x[i] * u.x[i] + u.y[i] * u.y[i])).sum::<f64>();
    let mut internal = 0.0;
    for i in 0..r.len() {
        internal += model.pressures.potential(Phase::from_indicator(chi.values()[i]), r[i])?;
    }
    let interface = kappa * curve.map_or(0.0, MarkerCurve::perimeter);
    Ok((kinetic, h2 * internal, interface))
}

/// `int S : D u` with the regularized stress, and `delta int |Lap^m u|^2`.
fn dissipation_rates(cfg: &StepConfig, s: &SimState, d: &SymTensorField, stress: &SymTensorField) -> (f64, f64) {
    let h2 = s.rho.grid().h().powi(2);
    let viscous = h2 * (0..d.xx.len()).map(|i| stress.at(i).dot(&d.at(i))).sum::<f64>();
    let hyper = if cfg.delta > 0.0 {
        let grid = s.rho.grid();
        let (cx, cy) = s.u.spectra();
        let m = cfg.hyper_order as i32;
        let sum: f64 = (0..grid.len())
            .filter(|&i| !grid.is_nyquist(i))
            .map(|i| {
                let (kx, ky) = grid.mode(i);
                let k2 = (2.0 * PI).powi(2) * (kx * kx + ky * ky) as f64;
                k2.powi(2 * m) * (cx[i].norm_sqr() + cy[i].norm_sqr())
            })
            .sum();
        cfg.delta * sum
    } else {
        0.0
    };
    (viscous, hyper)
}

impl SimState {
    /// Initial state; `u` is projected onto the band.
    pub fn new(model: &Model, cfg: &StepConfig, rho: ScalarField, u: VectorField, region: Region) -> Result<Self> {
        let grid = *rho.grid();
        cfg.validate(&grid)?;
        if *u.grid() != grid {
            return Err(Error::InvalidParameter("velocity and density grids differ".into()));
        }
        check_density(&rho)?;
        let u = u.project_bandlimit(cfg.band);
        let (chi, curve) = match region {
            Region::Uniform(p) => (ScalarField::constant(grid, p.indicator()), None),
            Region::Curve(c) => (c.rasterize(&grid), Some(c)),
        };
        let (kinetic, internal, interface) = energies(model, cfg.kappa, &rho, &chi, &u, curve.as_ref())?;
        let ledger = EnergyLedger { kinetic, internal, interface, dissipated_cum: 0.0, hyper_cum: 0.0 };
        Ok(SimState { time: 0.0, step: 0, rho, chi, curve, u, ledger, initial_energy: ledger.total() })
    }

    /// `E(t) - E(0) + dissipated + hyper`; nonpositive for an exact dissipative solution.
    pub fn balance_residual(&self) -> f64 {
        self.ledger.total() - self.initial_energy + self.ledger.dissipated_cum + self.ledger.hyper_cum
    }

    pub fn energy_report(&self) -> (EnergyLedger, f64) {
        (self.ledger, self.balance_residual())
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            time: self.time,
            kinetic: self.ledger.kinetic,
            internal: self.ledger.internal,
            interface: self.ledger.interface,
            dissipated_cum: self.ledger.dissipated_cum,
            hyper_cum: self.ledger.hyper_cum,
            balance_residual: self.balance_residual(),
            mass: self.rho.integrate(),
            max_div_u: self.u.divergence().max_abs(),
            min_rho: self.rho.min(),
            max_rho: self.rho.max(),
            perimeter: self.curve.as_ref().map_or(0.0, MarkerCurve::perimeter),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time,
            rho: self.rho.clone(),
            chi: self.chi.clone(),
            u: self.u.clone(),
            curve: self.curve.clone(),
            varifold: None,
        }
    }
}

/// One Lie-split step: transport with the current velocity, then the
/// momentum update against the transported density.
pub fn step(model: &Model, cfg: &StepConfig, s: &SimState) -> Result<SimState> {
    let grid = *s.rho.grid();
    let dt = cfg.dt;
    let d = s.u.sym_gradient();
    let stress_old = stress_field(model, &s.chi, &d, cfg.eps)?;
    let (viscous, hyper) = dissipation_rates(cfg, s, &d, &stress_old);

    let vel = VelocitySegment::frozen(s.time, s.time + dt, s.u.clone());
    let chars = CharacteristicConfig::for_grid(&grid).with_speed(vel.max_speed(), dt);
    let rho = transport_density(&s.rho, &vel, s.time, dt, &chars)?;
    check_density(&rho)?;
    let next = s.step + 1;
    let (curve, chi) = match &s.curve {
        Some(c) => {
            let moved = c.advect(&vel, s.time, dt, &chars, next)?;
            let chi = moved.rasterize(&grid);
            (Some(moved), chi)
        }
        None => (None, s.chi.clone()),
    };
    let varifold = curve.as_ref().map(MarkerCurve::varifold);

    let stress = if chi == s.chi { stress_old } else { stress_field(model, &chi, &d, cfg.eps)? };
    let rhs = rhs::assemble_with_stress(model, cfg, &rho, &chi, varifold.as_ref(), &s.u, &stress)?;
    let r = s.rho.values();
    let momentum = VectorField::new(
        grid,
        (0..grid.len()).map(|i| r[i] * s.u.x[i]).collect(),
        (0..grid.len()).map(|i| r[i] * s.u.y[i]).collect(),
    )?;
    let g = Functional::riesz(&momentum, cfg.band).add_scaled(dt, &rhs);
    let u = solve_weighted_projection(&rho, &g, cfg.band)?;

    let (kinetic, internal, interface) = energies(model, cfg.kappa, &rho, &chi, &u, curve.as_ref())?;
    let ledger = EnergyLedger {
        kinetic,
        internal,
        interface,
        dissipated_cum: s.ledger.dissipated_cum + dt * viscous,
        hyper_cum: s.ledger.hyper_cum + dt * hyper,
    };
    Ok(SimState { time: s.time + dt, step: next, rho, chi, curve, u, ledger, initial_energy: s.initial_energy })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Store a snapshot every this many steps (and always the first and last state).
    pub snapshot_every: usize,
    /// Declared density bounds; the initial extrema when absent.
    pub rho_bounds: Option<(f64, f64)>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { snapshot_every: 1, rho_bounds: None }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub diagnostics: Vec<Diagnostics>,
    pub final_state: SimState,
    /// The error that ended the run early, if any. The trajectory then ends
    /// at the last completed step.
    pub stop: Option<Error>,
}

pub fn run_parameters(model: &Model, cfg: &StepConfig, rho_bounds: (f64, f64)) -> RunParameters {
    RunParameters {
        potentials: model.potentials.clone(),
        pressures: model.pressures.clone(),
        kappa: cfg.kappa,
        eps: cfg.eps,
        delta: cfg.delta,
        hyper_order: cfg.hyper_order,
        dt: cfg.dt,
        band: cfg.band,
        rho_lo: rho_bounds.0,
        rho_hi: rho_bounds.1,
    }
}

/// Steps from `initial` to `cfg.t_end`, recording snapshots and diagnostics.
pub fn run(model: &Model, cfg: &StepConfig, initial: SimState, opts: RunOptions) -> RunOutcome {
    let every = opts.snapshot_every.max(1);
    let bounds = opts.rho_bounds.unwrap_or((initial.rho.min(), initial.rho.max()));
    let mut snapshots = vec![initial.snapshot()];
    let mut diagnostics = vec![initial.diagnostics()];
    let mut state = initial;
    let mut stop = None;
    for k in 1..=cfg.steps() {
        match step(model, cfg, &state) {
            Ok(next) => state = next,
            Err(e) => {
                stop = Some(e);
                break;
            }
        }
        diagnostics.push(state.diagnostics());
        if k % every == 0 {
            snapshots.push(state.snapshot());
        }
    }
    if snapshots.last().map(|s| s.time) != Some(state.time) {
        snapshots.push(state.snapshot());
    }
    RunOutcome {
        trajectory: Trajectory { params: run_parameters(model, cfg, bounds), snapshots },
        diagnostics,
        final_state: state,
        stop,
    }
}
