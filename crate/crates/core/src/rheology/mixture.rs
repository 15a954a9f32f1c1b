use super::{DissipationPotential, ProxResult, SymTensor2};
use crate::{Error, Result};

/// Which phase occupies a point: `One` where the indicator is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    Two,
}

impl Phase {
    /// Reads a nodal indicator value; anything at or above 1/2 is phase one.
    pub fn from_indicator(chi: f64) -> Phase {
        if chi >= 0.5 {
            Phase::One
        } else {
            Phase::Two
        }
    }

    pub fn indicator(self) -> f64 {
        match self {
            Phase::One => 1.0,
            Phase::Two => 0.0,
        }
    }
}

/// The two-phase potential `chi F1 + (1 - chi) F2` for binary `chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePotential {
    pub f1: DissipationPotential,
    pub f2: DissipationPotential,
    pub comparability_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparabilityReport {
    pub holds: bool,
    /// Smallest slack of the two-sided growth inequality over finite samples;
    /// negative when violated.
    pub worst_margin: f64,
    /// Indices of samples where either potential is `+inf`.
    pub skipped: Vec<usize>,
}

impl MixturePotential {
    pub fn new(f1: DissipationPotential, f2: DissipationPotential) -> Self {
        MixturePotential { f1, f2, comparability_k: None }
    }

    pub fn single(f: DissipationPotential) -> Self {
        MixturePotential::new(f.clone(), f)
    }

    pub fn with_comparability(mut self, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!("comparability k must be > 0, got {k}")));
        }
        self.comparability_k = Some(k);
        Ok(self)
    }

    pub fn potential(&self, phase: Phase) -> &DissipationPotential {
        match phase {
            Phase::One => &self.f1,
            Phase::Two => &self.f2,
        }
    }

    pub fn eval(&self, phase: Phase, d: &SymTensor2) -> f64 {
        self.potential(phase).eval(d)
    }

    pub fn prox(&self, phase: Phase, d: &SymTensor2, eps: f64) -> Result<ProxResult> {
        self.potential(phase).prox(d, eps)
    }

    /// Largest ball around 0 on which both potentials are finite.
    pub fn domain_radius(&self) -> f64 {
        self.f1.domain_radius().min(self.f2.domain_radius())
    }

    /// Tightest trace bound declared by either phase.
    pub fn trace_bound(&self) -> Option<f64> {
        match (self.f1.trace_bound(), self.f2.trace_bound()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Samples `F1/k - k <= F2 <= k (F1 + 1)`.
    pub fn check_comparability(&self, samples: &[SymTensor2]) -> Result<ComparabilityReport> {
        let k = self
            .comparability_k
            .ok_or_else(|| Error::InvalidParameter("comparability constant k is not set".into()))?;
        let mut worst = f64::INFINITY;
        let mut skipped = Vec::new();
        for (i, d) in samples.iter().enumerate() {
            let a = self.f1.eval(d);
            let b = self.f2.eval(d);
            if a.is_infinite() || b.is_infinite() {
                skipped.push(i);
                continue;
            }
            let lower = b - (a / k - k);
            let upper = k * (a + 1.0) - b;
            worst = worst.min(lower).min(upper);
        }
        Ok(ComparabilityReport { holds: worst >= 0.0, worst_margin: worst, skipped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(mu: f64) -> DissipationPotential {
        DissipationPotential::quadratic(mu, 0.0).unwrap()
    }

    #[test]
    fn binary_selector_picks_exact_potential() {
        let m = MixturePotential::new(quad(1.0), DissipationPotential::power_law(2.0, 3.0).unwrap());
        let d = SymTensor2::new(0.4, -0.3, 1.1);
        assert_eq!(m.eval(Phase::One, &d), m.f1.eval(&d));
        assert_eq!(m.eval(Phase::Two, &d), m.f2.eval(&d));
        assert_eq!(m.eval(Phase::One, &SymTensor2::ZERO), 0.0);
        assert_eq!(m.prox(Phase::Two, &d, 0.1).unwrap(), m.f2.prox(&d, 0.1).unwrap());
        let r = m.prox(Phase::One, &SymTensor2::diag(2.0, 0.0), 1.0).unwrap();
        assert!((r.stress - SymTensor2::diag(0.5, -0.5)).norm() < 1e-14);
    }

    fn samples() -> Vec<SymTensor2> {
        let mut out = Vec::new();
        for i in -4..=4 {
            for j in -4..=4 {
                out.push(SymTensor2::new(0.7 * i as f64, 0.3 * j as f64, -0.5 * i as f64));
            }
        }
        out.push(SymTensor2::new(10.0 / 2f64.sqrt(), 0.0, -10.0 / 2f64.sqrt()));
        out
    }

    #[test]
    fn identical_phases_are_comparable() {
        let m = MixturePotential::single(quad(3.0)).with_comparability(1.0).unwrap();
        assert!(m.check_comparability(&samples()).unwrap().holds);
    }

    #[test]
    fn quadratics_of_same_order_are_comparable() {
        let m = MixturePotential::new(quad(1.0), quad(2.0)).with_comparability(2.0).unwrap();
        let report = m.check_comparability(&samples()).unwrap();
        assert!(report.holds);
        // Oracle: the symbolic inequality on each sampled value.
        for d in samples() {
            let f1 = m.f1.eval(&d);
            assert!(0.5 * f1 - 2.0 <= 2.0 * f1 && 2.0 * f1 <= 2.0 * (f1 + 1.0));
        }
    }

    #[test]
    fn quartic_outgrows_quadratic() {
        let m = MixturePotential::new(quad(1.0), DissipationPotential::power_law(1.0, 4.0).unwrap())
            .with_comparability(10.0)
            .unwrap();
        let report = m.check_comparability(&samples()).unwrap();
        assert!(!report.holds);
        // |dev d| = 10: F1 = 50, F2 = 2500 > 10 * 51.
        assert!(report.worst_margin <= 10.0 * 51.0 - 2500.0 + 1e-9);
    }

    #[test]
    fn infinite_samples_are_reported_not_fatal() {
        let bounded = DissipationPotential::trace_bounded(quad(1.0), 0.0).unwrap();
        let m = MixturePotential::new(quad(1.0), bounded).with_comparability(1.0).unwrap();
        let report = m.check_comparability(&[SymTensor2::diag(1.0, 1.0), SymTensor2::ZERO]).unwrap();
        assert_eq!(report.skipped, vec![0]);
        assert!(report.holds);
    }

    #[test]
    fn missing_constant_is_an_error() {
        let m = MixturePotential::single(quad(1.0));
        assert!(m.check_comparability(&[]).is_err());
    }
}
