//! Advisory classification of a model against the hypotheses of the two
//! compressible existence results.

use super::Model;
use crate::rheology::{DissipationPotential, Phase, SymTensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// No surface tension, monotone pressures, growth at least quadratic,
    /// comparable phases.
    WithoutSurfaceTension,
    /// Isothermal pressures, surface tension allowed.
    IsothermalWithSurfaceTension,
    NonCompliant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub regime: Regime,
    /// Reasons the no-surface-tension result does not apply.
    pub without_tension: Vec<String>,
    /// Reasons the isothermal surface-tension result does not apply.
    pub with_tension: Vec<String>,
    /// Observations that do not change the classification.
    pub notes: Vec<String>,
}

fn label(phase: Phase) -> &'static str {
    match phase {
        Phase::One => "phase 1",
        Phase::Two => "phase 2",
    }
}

/// Growth, domain and trace conditions shared by both results.
fn structural(f: &DissipationPotential, phase: Phase, out: &mut Vec<String>) {
    let who = label(phase);
    if f.eval(&SymTensor2::ZERO) != 0.0 {
        out.push(format!("{who}: F(0) is not 0"));
    }
    if !(f.domain_radius() > 0.0) {
        out.push(format!("{who}: 0 is not an interior point of the domain"));
    }
    match f.deviatoric_growth() {
        None => out.push(format!("{who}: no deviatoric growth")),
        Some(a) if a <= 1.0 => out.push(format!("{who}: growth exponent {a} is not above 1")),
        _ => {}
    }
}

fn comparability_samples() -> Vec<SymTensor2> {
    let mut out = Vec::new();
    for e in -12..=12 {
        let r = 10f64.powf(e as f64 / 4.0);
        out.extend([
            SymTensor2::diag(r, r),
            SymTensor2::diag(-r, -r),
            SymTensor2::diag(r, -r),
            SymTensor2::new(0.0, r, 0.0),
            SymTensor2::new(r, 0.5 * r, -r / 3.0),
        ]);
    }
    out
}

pub fn hypothesis_check(model: &Model, kappa: f64) -> HypothesisReport {
    let pots = &model.potentials;
    let mut without = Vec::new();
    let mut with = Vec::new();
    let mut notes = Vec::new();

    if kappa != 0.0 {
        without.push(format!("surface tension kappa = {kappa} is not zero"));
    }
    for phase in [Phase::One, Phase::Two] {
        let f = pots.potential(phase);
        let mut s = Vec::new();
        structural(f, phase, &mut s);
        without.extend(s.iter().cloned());
        with.extend(s);
        match f.deviatoric_growth() {
            Some(a) if a < 2.0 => without.push(format!("{}: growth exponent {a} is below 2", label(phase))),
            _ => {}
        }
        if f.trace_bound().is_none() {
            with.push(format!("{}: no upper bound on tr D", label(phase)));
            notes.push(format!("{}: no upper bound on tr D, so div u is not bounded a priori", label(phase)));
        }
        if !model.pressures.law(phase).is_isothermal() {
            with.push(format!("{}: pressure is not isothermal", label(phase)));
        }
    }
    if pots.f1 != pots.f2 {
        match pots.check_comparability(&comparability_samples()) {
            Ok(r) if r.holds => {}
            Ok(r) => without.push(format!(
                "phases are not comparable with k = {}: worst margin {}",
                pots.comparability_k.unwrap_or(f64::NAN),
                r.worst_margin
            )),
            Err(_) => without.push("phases differ and no comparability constant k is given".into()),
        }
    }

    let regime = if without.is_empty() {
        Regime::WithoutSurfaceTension
    } else if with.is_empty() {
        Regime::IsothermalWithSurfaceTension
    } else {
        Regime::NonCompliant
    };
    HypothesisReport { regime, without_tension: without, with_tension: with, notes }
}
