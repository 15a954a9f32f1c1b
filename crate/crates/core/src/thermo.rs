//! Barotropic pressure laws `p(rho)` and pressure potentials `P` with
//! `P'(rho) rho - P(rho) = p(rho)`.

use crate::rheology::Phase;
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub enum PressureLaw {
    /// `p = a rho`, `P = a rho ln rho`.
    Isothermal {
        a: f64,
    },
    TabulatedMonotone(MonotoneTable),
}

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant of tabulated
/// pressure values, with precomputed potential integrals at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    rho: Vec<f64>,
    p: Vec<f64>,
    slopes: Vec<f64>,
    /// Density where the potential vanishes: 1 when tabulated, else the first node.
    reference: f64,
    /// `int_reference^{rho_i} p(z) / z^2 dz` at every node.
    cumulative: Vec<f64>,
}

impl PressureLaw {
    pub fn isothermal(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("isothermal a must be > 0, got {a}")));
        }
        Ok(PressureLaw::Isothermal { a })
    }

    pub fn tabulated(rho: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        Ok(PressureLaw::TabulatedMonotone(MonotoneTable::new(rho, p)?))
    }

    pub fn is_isothermal(&self) -> bool {
        matches!(self, PressureLaw::Isothermal { .. })
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        match self {
            PressureLaw::Isothermal { a } => Ok(a * rho),
            PressureLaw::TabulatedMonotone(t) => t.value(rho),
        }
    }

    /// `P(rho)`, normalized so that `P(1) = 0`.
    pub fn pressure_potential(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        match self {
            PressureLaw::Isothermal { a } => Ok(a * rho * rho.ln()),
            PressureLaw::TabulatedMonotone(t) => t.potential(rho),
        }
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("density must be positive and finite, got {rho}")))
    }
}

impl MonotoneTable {
    pub fn new(rho: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if rho.len() != p.len() {
            return bad(format!("table has {} densities but {} pressures", rho.len(), p.len()));
        }
        if rho.len() < 2 {
            return bad("pressure table needs at least two nodes".into());
        }
        if rho.iter().chain(&p).any(|v| !v.is_finite()) {
            return bad("pressure table contains non-finite values".into());
        }
        if rho[0] <= 0.0 {
            return bad(format!("table densities must be > 0, got {}", rho[0]));
        }
        if rho.windows(2).any(|w| w[1] <= w[0]) {
            return bad("table densities must be strictly increasing".into());
        }
        if p[0] < 0.0 || p.windows(2).any(|w| w[1] < w[0]) {
            return bad("table pressures must be nonnegative and nondecreasing".into());
        }
        let slopes = fritsch_carlson_slopes(&rho, &p);
        let (lo, hi) = (rho[0], rho[rho.len() - 1]);
        let reference = if (lo..=hi).contains(&1.0) { 1.0 } else { lo };
        let mut table = MonotoneTable { rho, p, slopes, reference, cumulative: Vec::new() };
        let mut cumulative = vec![0.0; table.rho.len()];
        for i in 1..table.rho.len() {
            cumulative[i] = cumulative[i - 1] + table.integral(i - 1, table.rho[i - 1], table.rho[i]);
        }
        let offset = table.integral_from_nodes(&cumulative, reference);
        for c in &mut cumulative {
            *c -= offset;
        }
        table.cumulative = cumulative;
        Ok(table)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.rho[0], self.rho[self.rho.len() - 1])
    }

    pub fn reference_density(&self) -> f64 {
        self.reference
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.rho, &self.p)
    }

    fn interval(&self, rho: f64) -> Result<usize> {
        let (lo, hi) = self.range();
        if !(rho >= lo && rho <= hi) {
            return Err(Error::OutOfRange { rho, lo, hi });
        }
        let i = self.rho.partition_point(|&r| r <= rho);
        Ok(i.clamp(1, self.rho.len() - 1) - 1)
    }

    fn hermite(&self, i: usize, rho: f64) -> f64 {
        let h = self.rho[i + 1] - self.rho[i];
        let s = (rho - self.rho[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.p[i] + h10 * h * self.slopes[i] + h01 * self.p[i + 1] + h11 * h * self.slopes[i + 1]
    }

    fn value(&self, rho: f64) -> Result<f64> {
        let i = self.interval(rho)?;
        Ok(self.hermite(i, rho))
    }

    /// `int_a^b p(z)/z^2 dz` inside interval `i`, by adaptive Simpson.
    fn integral(&self, i: usize, a: f64, b: f64) -> f64 {
        let f = |z: f64| self.hermite(i, z) / (z * z);
        adaptive_simpson(&f, a, b, QUAD_TOL)
    }

    fn integral_from_nodes(&self, cumulative: &[f64], rho: f64) -> f64 {
        let i = self.interval(rho).expect("density checked against the table range");
        cumulative[i] + self.integral(i, self.rho[i], rho)
    }

    fn potential(&self, rho: f64) -> Result<f64> {
        self.interval(rho)?;
        Ok(rho * self.integral_from_nodes(&self.cumulative, rho))
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let edge = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let m0 = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if m0.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && m0.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            m0
        }
    };
    m[0] = edge(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH)
}

/// Phase-selected pressure `chi p1 + (1 - chi) p2` for binary `chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePressure {
    pub p1: PressureLaw,
    pub p2: PressureLaw,
}

impl MixturePressure {
    pub fn new(p1: PressureLaw, p2: PressureLaw) -> Self {
        MixturePressure { p1, p2 }
    }

    pub fn law(&self, phase: Phase) -> &PressureLaw {
        match phase {
            Phase::One => &self.p1,
            Phase::Two => &self.p2,
        }
    }

    pub fn pressure(&self, phase: Phase, rho: f64) -> Result<f64> {
        self.law(phase).pressure(rho)
    }

    pub fn potential(&self, phase: Phase, rho: f64) -> Result<f64> {
        self.law(phase).pressure_potential(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn table() -> PressureLaw {
        PressureLaw::tabulated(vec![0.05, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0], vec![0.0, 0.2, 1.0, 1.1, 3.0, 9.0, 9.5])
            .unwrap()
    }

    #[test]
    fn isothermal_values() {
        assert_eq!(PressureLaw::isothermal(1.0).unwrap().pressure(2.0).unwrap(), 2.0);
        assert_eq!(PressureLaw::isothermal(3.0).unwrap().pressure(1.0).unwrap(), 3.0);
        let p = PressureLaw::isothermal(1.0).unwrap().pressure_potential(E).unwrap();
        assert!((p - E).abs() < 1e-15);
        let q = PressureLaw::isothermal(2.0).unwrap().pressure_potential(1.0 / E).unwrap();
        assert!((q + 2.0 / E).abs() < 1e-15);
    }

    #[test]
    fn table_hits_nodes_and_rejects_outside() {
        let t = PressureLaw::tabulated(vec![1.0, 2.0], vec![1.0, 4.0]).unwrap();
        assert_eq!(t.pressure(1.0).unwrap(), 1.0);
        assert_eq!(t.pressure(2.0).unwrap(), 4.0);
        assert!(matches!(t.pressure(2.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(t.pressure_potential(0.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn potential_vanishes_at_unit_density() {
        assert_eq!(PressureLaw::isothermal(4.0).unwrap().pressure_potential(1.0).unwrap(), 0.0);
        assert!(table().pressure_potential(1.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(PressureLaw::tabulated(vec![1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(PressureLaw::tabulated(vec![1.0, 2.0], vec![1.0, 0.5]).is_err());
        assert!(PressureLaw::tabulated(vec![0.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(PressureLaw::tabulated(vec![1.0], vec![1.0]).is_err());
        assert!(PressureLaw::isothermal(0.0).is_err());
    }

    #[test]
    fn interpolant_never_overshoots() {
        let t = table();
        let PressureLaw::TabulatedMonotone(inner) = &t else { unreachable!() };
        let (rho, p) = inner.nodes();
        for k in 0..rho.len() - 1 {
            for j in 0..=100 {
                let r = rho[k] + (rho[k + 1] - rho[k]) * j as f64 / 100.0;
                let v = t.pressure(r).unwrap();
                assert!(v >= p[k] - 1e-14 && v <= p[k + 1] + 1e-14, "overshoot at {r}: {v}");
            }
        }
    }

    #[test]
    fn ode_identity_by_finite_differences() {
        for law in [PressureLaw::isothermal(1.7).unwrap(), table()] {
            for i in 0..1000 {
                let rho = 0.1 * 100f64.powf(i as f64 / 999.0);
                let h = 1e-5 * rho;
                let (lo, hi) = (rho - h, rho + h);
                let dp = (law.pressure_potential(hi).unwrap() - law.pressure_potential(lo).unwrap()) / (hi - lo);
                let p = law.pressure(rho).unwrap();
                let resid = dp * rho - law.pressure_potential(rho).unwrap() - p;
                assert!(resid.abs() <= 1e-6 * p.max(1.0), "{law:?} at {rho}: {resid}");
            }
        }
    }

    #[test]
    fn potential_is_convex() {
        for law in [PressureLaw::isothermal(1.0).unwrap(), table()] {
            let h = 1e-2;
            for i in 1..900 {
                let rho = 0.1 + 0.01 * i as f64;
                let second = law.pressure_potential(rho + h).unwrap() - 2.0 * law.pressure_potential(rho).unwrap()
                    + law.pressure_potential(rho - h).unwrap();
                assert!(second >= -1e-8, "{law:?} at {rho}: {second}");
            }
        }
    }

    #[test]
    fn mixture_selects_phase() {
        let m = MixturePressure::new(PressureLaw::isothermal(1.0).unwrap(), table());
        assert_eq!(m.pressure(Phase::One, 2.0).unwrap(), 2.0);
        assert_eq!(m.pressure(Phase::Two, 2.0).unwrap(), table().pressure(2.0).unwrap());
        assert_eq!(m.potential(Phase::Two, 3.0).unwrap(), table().pressure_potential(3.0).unwrap());
    }
}
