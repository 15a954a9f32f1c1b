use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
///
/// Only one off-diagonal entry is stored, so asymmetric values cannot be
/// represented. Contractions use the Frobenius product, so the off-diagonal
/// entry counts twice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { xx: 0.0, xy: 0.0, yy: 0.0 };
    pub const IDENTITY: SymTensor2 = SymTensor2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymTensor2 { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        SymTensor2 { xx: a, xy: 0.0, yy: b }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Deviatoric part `D - (tr D / 2) I`; its trace is exactly zero.
    pub fn dev(&self) -> Self {
        let half = 0.5 * (self.xx - self.yy);
        SymTensor2 { xx: half, xy: self.xy, yy: -half }
    }

    /// Isotropic part `(tr D / 2) I`.
    pub fn iso(&self) -> Self {
        let m = 0.5 * self.trace();
        SymTensor2::diag(m, m)
    }

    /// Frobenius product `A : B`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Norm of the deviatoric part, computed without cancellation from `tr`.
    pub fn dev_norm(&self) -> f64 {
        self.dev_norm_sq().sqrt()
    }

    pub fn dev_norm_sq(&self) -> f64 {
        let half = 0.5 * (self.xx - self.yy);
        2.0 * (half * half + self.xy * self.xy)
    }

    pub fn scale(&self, s: f64) -> Self {
        SymTensor2 { xx: s * self.xx, xy: s * self.xy, yy: s * self.yy }
    }

    /// Rebuilds a tensor from a deviatoric part and a trace.
    pub fn from_parts(dev: &Self, trace: f64) -> Self {
        let m = 0.5 * trace;
        SymTensor2 { xx: dev.xx + m, xy: dev.xy, yy: dev.yy + m }
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.xx, self.xy, self.yy]
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2 { xx: self.xx + o.xx, xy: self.xy + o.xy, yy: self.yy + o.yy }
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, o: SymTensor2) {
        self.xx += o.xx;
        self.xy += o.xy;
        self.yy += o.yy;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2 { xx: self.xx - o.xx, xy: self.xy - o.xy, yy: self.yy - o.yy }
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        self.scale(-1.0)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, t: SymTensor2) -> SymTensor2 {
        t.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deviator_is_traceless() {
        let d = SymTensor2::new(3.0, -1.5, 0.25);
        assert_eq!(d.dev().trace(), 0.0);
        let back = SymTensor2::from_parts(&d.dev(), d.trace());
        assert!((back - d).norm() < 1e-15);
    }

    #[test]
    fn frobenius_counts_off_diagonal_twice() {
        let d = SymTensor2::new(0.0, 1.0, 0.0);
        assert_eq!(d.norm_sq(), 2.0);
    }

    proptest! {
        #[test]
        fn dev_and_iso_are_orthogonal(xx in -10.0..10.0f64, xy in -10.0..10.0f64, yy in -10.0..10.0f64) {
            let d = SymTensor2::new(xx, xy, yy);
            prop_assert!(d.dev().dot(&d.iso()).abs() < 1e-12);
            let split = d.dev().norm_sq() + 0.5 * d.trace() * d.trace();
            prop_assert!((split - d.norm_sq()).abs() <= 1e-12 * (1.0 + d.norm_sq()));
            prop_assert!((d.dev_norm() - d.dev().norm()).abs() <= 1e-12 * (1.0 + d.norm()));
        }
    }
}
