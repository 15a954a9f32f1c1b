//! A stored run: snapshots of the state plus the parameters that produced it.

use crate::fields::{PeriodicGrid, ScalarField, VectorField};
use crate::interface::{DiscreteVarifold, MarkerCurve};
use crate::rheology::MixturePotential;
use crate::thermo::MixturePressure;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub rho: ScalarField,
    pub chi: ScalarField,
    pub u: VectorField,
    pub curve: Option<MarkerCurve>,
    /// Varifold attached to the snapshot; derived from `curve` when absent.
    pub varifold: Option<DiscreteVarifold>,
}

impl Snapshot {
    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    pub fn varifold(&self) -> DiscreteVarifold {
        match (&self.varifold, &self.curve) {
            (Some(v), _) => v.clone(),
            (None, Some(c)) => c.varifold(),
            (None, None) => DiscreteVarifold::default(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        self.curve.as_ref().map_or(0.0, MarkerCurve::perimeter)
    }
}

/// The model and discretization parameters recorded with a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParameters {
    pub potentials: MixturePotential,
    pub pressures: MixturePressure,
    pub kappa: f64,
    pub eps: f64,
    pub delta: f64,
    pub hyper_order: u32,
    pub dt: f64,
    pub band: usize,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: RunParameters,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn grid(&self) -> &PeriodicGrid {
        self.snapshots[0].grid()
    }

    /// Checks shapes and time ordering.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedTrajectory(m));
        let Some(first) = self.snapshots.first() else {
            return bad("trajectory has no snapshots".into());
        };
        let g = *first.grid();
        for (k, s) in self.snapshots.iter().enumerate() {
            if *s.rho.grid() != g || *s.chi.grid() != g || *s.u.grid() != g {
                return bad(format!("snapshot {k} is not on the {}-point grid", g.n()));
            }
            if !s.time.is_finite() {
                return bad(format!("snapshot {k} has a non-finite time"));
            }
            if k > 0 && s.time <= self.snapshots[k - 1].time {
                return bad(format!("snapshot times are not strictly increasing at {k}"));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}
