//! Calibration of the tolerance constants on runs whose exact residuals vanish.

use std::f64::consts::PI;

use super::{certify_with, Clause, Tolerances};
use crate::dynamics::{run, Model, Region, RunOptions, SimState, StepConfig};
use crate::fields::{PeriodicGrid, ScalarField, VectorField};
use crate::interface::MarkerCurve;
use crate::rheology::{DissipationPotential, MixturePotential};
use crate::thermo::{MixturePressure, PressureLaw};
use crate::trajectory::Trajectory;
use crate::Result;

fn model(lambda: f64, a1: f64, a2: f64) -> Result<Model> {
    Ok(Model {
        potentials: MixturePotential::single(DissipationPotential::quadratic(0.2, lambda)?),
        pressures: MixturePressure::new(PressureLaw::isothermal(a1)?, PressureLaw::isothermal(a2)?),
    })
}

/// Runs whose exact solutions are known, on a 32-point grid: a bubble held
/// at rest by the Laplace pressure jump, and a droplet carried by a uniform flow.
pub fn calibration_trajectories() -> Result<Vec<(&'static str, Trajectory)>> {
    let g = PeriodicGrid::new(32)?;
    let opts = RunOptions { snapshot_every: 10, rho_bounds: None };
    let mut out = Vec::new();

    let (kappa, radius, a) = (0.01, 0.25, 1.5);
    let cfg = StepConfig { kappa, ..StepConfig::new(1e-3, 8, 0.2) };
    let m = model(0.1, a, a)?;
    let circle = MarkerCurve::circle([0.5, 0.5], radius, 128, 2.0 * PI * radius / 128.0)?;
    let jump = kappa / (radius * a);
    let rho = circle.rasterize(&g).map(|c| 1.2 + jump * c);
    let s0 = SimState::new(&m, &cfg, rho, VectorField::zeros(g), Region::Curve(circle))?;
    out.push(("equilibrium", run(&m, &cfg, s0, opts).trajectory));

    let cfg = StepConfig::new(1e-3, 8, 0.2);
    let m = model(0.0, a, a)?;
    let circle = MarkerCurve::circle([0.45, 0.55], 0.2, 96, 2.0 * PI * 0.2 / 96.0)?;
    let u = VectorField::from_fn(g, |_| [0.3, -0.2]);
    let s0 = SimState::new(&m, &cfg, ScalarField::constant(g, 0.9), u, Region::Curve(circle))?;
    out.push(("translation", run(&m, &cfg, s0, opts).trajectory));
    Ok(out)
}

/// Worst `|residual| / ((h + dt) M)` per clause over the calibration runs,
/// counting only the negative part for the inequality, and the worst
/// absolute compatibility residual per unit weight.
pub fn calibration_ratios(n_tests: usize, seed: u64) -> Result<Tolerances> {
    let unit = Tolerances { transport: 1.0, mass: 1.0, momentum_energy: 1.0, compatibility: 1.0 };
    let mut worst = Tolerances { transport: 0.0, mass: 0.0, momentum_energy: 0.0, compatibility: 0.0 };
    for (_, traj) in calibration_trajectories()? {
        let report = certify_with(&traj, n_tests, seed, &unit)?;
        for c in &report.clauses {
            let ratio = c
                .entries
                .iter()
                .filter(|e| e.tol > 0.0)
                .map(|e| match c.clause {
                    Clause::MomentumEnergy => (-e.residual).max(0.0) / e.tol,
                    _ => e.residual.abs() / e.tol,
                })
                .fold(0.0, f64::max);
            match c.clause {
                Clause::Transport => worst.transport = worst.transport.max(ratio),
                Clause::Mass => worst.mass = worst.mass.max(ratio),
                Clause::MomentumEnergy => worst.momentum_energy = worst.momentum_energy.max(ratio),
                Clause::Compatibility | Clause::Bounds => {}
            }
        }
    }
    Ok(worst)
}
