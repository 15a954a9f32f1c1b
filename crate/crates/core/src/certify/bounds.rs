//! Pointwise bounds on stored snapshots.

use crate::trajectory::Trajectory;

/// Slack on the density envelope.
pub const ENVELOPE_SLACK: f64 = 1e-8;
/// Relative slack on the divergence bound.
pub const DIVERGENCE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Indicator,
    DensityBelow,
    DensityAbove,
    Divergence,
}

impl BoundKind {
    pub fn label(self) -> &'static str {
        match self {
            BoundKind::Indicator => "indicator",
            BoundKind::DensityBelow => "density-lower",
            BoundKind::DensityAbove => "density-upper",
            BoundKind::Divergence => "divergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub snapshot: usize,
    pub time: f64,
    pub node: usize,
    pub kind: BoundKind,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// Worst excess over any limit per snapshot; positive means violated.
    pub excess: Vec<f64>,
    /// Worst node per snapshot and bound kind.
    pub violations: Vec<BoundViolation>,
    /// `1.05 dbar - max |div u|` over all snapshots, when a bound is declared.
    pub divergence_margin: Option<f64>,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `chi` in `{0, 1}`, the density envelope
/// `rho_lo e^{-G(t)} <= rho <= rho_hi e^{G(t)}` and, with a declared trace
/// bound, `max |div u| <= 1.05 dbar`. `G(t) = t dbar` when `dbar` is given,
/// otherwise the upper sum of `max |div u|` over the stored snapshots.
pub fn bounds_check(traj: &Trajectory, dbar: Option<f64>, rho_lo: f64, rho_hi: f64) -> BoundsReport {
    let t0 = traj.snapshots.first().map_or(0.0, |s| s.time);
    let mut report = BoundsReport { excess: Vec::new(), violations: Vec::new(), divergence_margin: None };
    let mut growth = 0.0;
    let mut prev_div: Option<(f64, f64)> = None;
    for (k, s) in traj.snapshots.iter().enumerate() {
        let div = s.u.divergence();
        let max_div = div.max_abs();
        growth = match dbar {
            Some(d) => (s.time - t0) * d,
            None => match prev_div {
                Some((t, m)) => growth + (s.time - t) * m.max(max_div),
                None => 0.0,
            },
        };
        prev_div = Some((s.time, max_div));
        let lo = rho_lo * (-growth).exp() - ENVELOPE_SLACK;
        let hi = rho_hi * growth.exp() + ENVELOPE_SLACK;

        let mut worst: [Option<(usize, f64, f64, f64)>; 4] = [None; 4];
        let mut note = |slot: usize, node: usize, value: f64, limit: f64, excess: f64| {
            if worst[slot].is_none_or(|w| excess > w.3) {
                worst[slot] = Some((node, value, limit, excess));
            }
        };
        for (i, &c) in s.chi.values().iter().enumerate() {
            let e = if c == 0.0 || c == 1.0 { 0.0 } else { c.abs().min((c - 1.0).abs()).max(f64::MIN_POSITIVE) };
            note(0, i, c, if c < 0.5 { 0.0 } else { 1.0 }, e);
        }
        for (i, &r) in s.rho.values().iter().enumerate() {
            note(1, i, r, lo, if r.is_nan() { f64::INFINITY } else { lo - r });
            note(2, i, r, hi, if r.is_nan() { f64::INFINITY } else { r - hi });
        }
        if let Some(d) = dbar {
            let limit = (1.0 + DIVERGENCE_SLACK) * d;
            for (i, &v) in div.values().iter().enumerate() {
                note(3, i, v, limit, v.abs() - limit);
            }
            let margin = limit - max_div;
            report.divergence_margin = Some(report.divergence_margin.map_or(margin, |m: f64| m.min(margin)));
        }
        let kinds = [BoundKind::Indicator, BoundKind::DensityBelow, BoundKind::DensityAbove, BoundKind::Divergence];
        let mut excess = f64::NEG_INFINITY;
        for (slot, kind) in kinds.into_iter().enumerate() {
            if let Some((node, value, limit, e)) = worst[slot] {
                excess = excess.max(e);
                if e > 0.0 {
                    report.violations.push(BoundViolation { snapshot: k, time: s.time, node, kind, value, limit });
                }
            }
        }
        report.excess.push(excess);
    }
    report
}
