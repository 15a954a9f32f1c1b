use super::SymTensor2;
use crate::{Error, Result};

/// Newton iteration cap for the scalar proximal equation.
pub const NEWTON_MAX_ITER: usize = 64;
/// Tolerance on the scalar proximal residual, relative to `max(1, |dev D|)`.
pub const NEWTON_TOL: f64 = 1e-12;

/// Relative slack used when testing membership in a bounded domain, so that
/// proximal points placed exactly on the boundary stay in the domain after
/// rounding.
const DOMAIN_SLACK: f64 = 1e-12;

/// Extended-real convex dissipation potential on symmetric 2x2 tensors.
///
/// Every family is a sum of a radial function of `|dev D|` and a function of
/// `tr D`, each possibly restricted to an interval. `+inf` is represented by
/// `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub enum DissipationPotential {
    /// `mu/2 |dev D|^2 + lambda/2 (tr D)^2`.
    Quadratic { mu: f64, lambda: f64 },
    /// `mu/alpha |dev D|^alpha + lambda/2 (tr D)^2`.
    PowerLaw { mu: f64, alpha: f64, lambda: f64 },
    /// `inner(D)` if `tr D <= dbar`, `+inf` otherwise.
    TraceBounded { inner: Box<DissipationPotential>, dbar: f64 },
    /// `inner(D)` if `|dev D| <= radius`, `+inf` otherwise.
    DeviatoricCap { inner: Box<DissipationPotential>, radius: f64 },
}

/// Outcome of the proximal map `argmin_M |M - D|^2 / (2 eps) + F(M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxResult {
    pub minimizer: SymTensor2,
    /// Moreau envelope `F^eps(D)`.
    pub envelope_value: f64,
    /// Envelope gradient `(D - minimizer) / eps`, the regularized stress.
    pub stress: SymTensor2,
}

#[derive(Debug, Clone, Copy)]
enum Growth {
    Quadratic { mu: f64 },
    Power { mu: f64, alpha: f64 },
}

/// The (deviatoric radius, trace) decomposition shared by all families.
#[derive(Debug, Clone, Copy)]
struct Split {
    growth: Growth,
    cap: f64,
    lambda: f64,
    trace_max: f64,
}

impl DissipationPotential {
    pub fn quadratic(mu: f64, lambda: f64) -> Result<Self> {
        let f = DissipationPotential::Quadratic { mu, lambda };
        f.validate()?;
        Ok(f)
    }

    pub fn power_law(mu: f64, alpha: f64) -> Result<Self> {
        Self::power_law_with_trace(mu, alpha, 0.0)
    }

    pub fn power_law_with_trace(mu: f64, alpha: f64, lambda: f64) -> Result<Self> {
        let f = DissipationPotential::PowerLaw { mu, alpha, lambda };
        f.validate()?;
        Ok(f)
    }

    pub fn trace_bounded(inner: DissipationPotential, dbar: f64) -> Result<Self> {
        let f = DissipationPotential::TraceBounded { inner: Box::new(inner), dbar };
        f.validate()?;
        Ok(f)
    }

    pub fn dev_cap(inner: DissipationPotential, radius: f64) -> Result<Self> {
        let f = DissipationPotential::DeviatoricCap { inner: Box::new(inner), radius };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            DissipationPotential::Quadratic { mu, lambda } => {
                if !(mu.is_finite() && *mu >= 0.0) {
                    return bad(format!("quadratic mu must be >= 0, got {mu}"));
                }
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return bad(format!("quadratic lambda must be >= 0, got {lambda}"));
                }
            }
            DissipationPotential::PowerLaw { mu, alpha, lambda } => {
                if !(mu.is_finite() && *mu > 0.0) {
                    return bad(format!("power mu must be > 0, got {mu}"));
                }
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return bad(format!("power alpha must be > 1, got {alpha}"));
                }
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return bad(format!("power lambda must be >= 0, got {lambda}"));
                }
            }
            DissipationPotential::TraceBounded { inner, dbar } => {
                if !(dbar.is_finite() && *dbar >= 0.0) {
                    return bad(format!("trace_bounded dbar must be >= 0, got {dbar}"));
                }
                inner.validate()?;
            }
            DissipationPotential::DeviatoricCap { inner, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("dev_cap radius must be > 0, got {radius}"));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    fn split(&self) -> Split {
        match self {
            DissipationPotential::Quadratic { mu, lambda } => Split {
                growth: Growth::Quadratic { mu: *mu },
                cap: f64::INFINITY,
                lambda: *lambda,
                trace_max: f64::INFINITY,
            },
            DissipationPotential::PowerLaw { mu, alpha, lambda } => Split {
                growth: Growth::Power { mu: *mu, alpha: *alpha },
                cap: f64::INFINITY,
                lambda: *lambda,
                trace_max: f64::INFINITY,
            },
            DissipationPotential::TraceBounded { inner, dbar } => {
                let mut s = inner.split();
                s.trace_max = s.trace_max.min(*dbar);
                s
            }
            DissipationPotential::DeviatoricCap { inner, radius } => {
                let mut s = inner.split();
                s.cap = s.cap.min(*radius);
                s
            }
        }
    }

    /// `F(D)`, possibly `+inf`.
    pub fn eval(&self, d: &SymTensor2) -> f64 {
        let s = self.split();
        let r2 = d.dev_norm_sq();
        let t = d.trace();
        if !s.radial_in_domain(r2.sqrt()) || !s.trace_in_domain(t) {
            return f64::INFINITY;
        }
        let radial = match s.growth {
            Growth::Quadratic { mu } => 0.5 * mu * r2,
            Growth::Power { .. } => s.radial_value(r2.sqrt()),
        };
        radial + 0.5 * s.lambda * t * t
    }

    /// Convex conjugate `F*(S) = sup_D { S:D - F(D) }`.
    ///
    /// Splits into a radial supremum over `|dev D|` and a supremum over
    /// `tr D`, each solved in closed form and clamped to its interval.
    pub fn conjugate(&self, stress: &SymTensor2) -> Result<f64> {
        let s = self.split();
        let a = stress.dev_norm();
        let b = 0.5 * stress.trace();
        let value = s.radial_conjugate(a) + s.trace_conjugate(b);
        if value.is_nan() {
            return Err(Error::NumericFailure(format!("conjugate evaluation produced NaN at {stress:?}")));
        }
        Ok(value)
    }

    /// Proximal point, Moreau envelope and envelope gradient at `d`.
    pub fn prox(&self, d: &SymTensor2, eps: f64) -> Result<ProxResult> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("prox eps must be > 0, got {eps}")));
        }
        let s = self.split();
        let dev = d.dev();
        let a = d.dev_norm();
        let trace = d.trace();

        let rho = s.radial_prox(a, eps)?;
        let t = s.trace_prox(trace, 2.0 * eps);

        let (dev_min, dev_stress) = if a > 0.0 {
            (dev.scale(rho / a), dev.scale((a - rho) / (a * eps)))
        } else {
            (SymTensor2::ZERO, SymTensor2::ZERO)
        };
        let minimizer = SymTensor2::from_parts(&dev_min, t);
        let stress = SymTensor2::from_parts(&dev_stress, (trace - t) / eps);
        let envelope_value = (a - rho).powi(2) / (2.0 * eps)
            + (t - trace).powi(2) / (4.0 * eps)
            + s.radial_value(rho)
            + 0.5 * s.lambda * t * t;
        if !envelope_value.is_finite() || !stress.is_finite() {
            return Err(Error::NumericFailure(format!("prox produced non-finite output at {d:?}")));
        }
        Ok(ProxResult { minimizer, envelope_value, stress })
    }

    /// Fenchel-Young gap `F(D) + F*(S) - S:D`; zero exactly on subgradient pairs.
    pub fn fenchel_gap(&self, d: &SymTensor2, stress: &SymTensor2) -> Result<f64> {
        let fd = self.eval(d);
        if fd.is_infinite() {
            return Err(Error::InfiniteOperand(format!("F(D) = +inf at {d:?}")));
        }
        let fs = self.conjugate(stress)?;
        if fs.is_infinite() {
            return Err(Error::InfiniteOperand(format!("F*(S) = +inf at {stress:?}")));
        }
        Ok(fd + fs - stress.dot(d))
    }

    /// Radius `r0` of a closed ball around 0 on which `F` is finite
    /// (`+inf` when the domain is the whole space).
    pub fn domain_radius(&self) -> f64 {
        let s = self.split();
        s.cap.min(s.trace_max / std::f64::consts::SQRT_2)
    }

    /// Upper bound on `tr D` enforced by the potential, if any.
    pub fn trace_bound(&self) -> Option<f64> {
        let t = self.split().trace_max;
        t.is_finite().then_some(t)
    }

    /// Growth exponent of the deviatoric part: `Some(inf)` for a capped
    /// deviator, `None` when there is no deviatoric growth at all.
    pub fn deviatoric_growth(&self) -> Option<f64> {
        let s = self.split();
        if s.cap.is_finite() {
            return Some(f64::INFINITY);
        }
        match s.growth {
            Growth::Quadratic { mu } if mu > 0.0 => Some(2.0),
            Growth::Quadratic { .. } => None,
            Growth::Power { alpha, .. } => Some(alpha),
        }
    }
}

impl Split {
    fn radial_in_domain(&self, r: f64) -> bool {
        r <= self.cap * (1.0 + DOMAIN_SLACK)
    }

    fn trace_in_domain(&self, t: f64) -> bool {
        t <= self.trace_max + DOMAIN_SLACK * self.trace_max.abs().max(1.0)
    }

    fn radial_value(&self, r: f64) -> f64 {
        match self.growth {
            Growth::Quadratic { mu } => 0.5 * mu * r * r,
            Growth::Power { mu, alpha } => mu / alpha * r.powf(alpha),
        }
    }

    /// `sup_{0 <= r <= cap} a r - g(r)` for `a >= 0`.
    fn radial_conjugate(&self, a: f64) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        let unconstrained = match self.growth {
            Growth::Quadratic { mu } if mu > 0.0 => a / mu,
            Growth::Quadratic { .. } => f64::INFINITY,
            Growth::Power { mu, alpha } => (a / mu).powf(1.0 / (alpha - 1.0)),
        };
        let r = unconstrained.min(self.cap);
        if r.is_infinite() {
            return f64::INFINITY;
        }
        a * r - self.radial_value(r)
    }

    /// `sup_{t <= trace_max} b t - lambda/2 t^2`.
    fn trace_conjugate(&self, b: f64) -> f64 {
        if self.lambda > 0.0 {
            let t = (b / self.lambda).min(self.trace_max);
            return b * t - 0.5 * self.lambda * t * t;
        }
        if b == 0.0 {
            0.0
        } else if b > 0.0 && self.trace_max.is_finite() {
            b * self.trace_max
        } else {
            f64::INFINITY
        }
    }

    /// `argmin_{0 <= r <= cap} (r - a)^2 / (2 eps) + g(r)`.
    fn radial_prox(&self, a: f64, eps: f64) -> Result<f64> {
        if a == 0.0 {
            return Ok(0.0);
        }
        let r = match self.growth {
            Growth::Quadratic { mu } => a / (1.0 + eps * mu),
            Growth::Power { mu, alpha } => power_prox_radius(a, eps * mu, alpha)?,
        };
        Ok(r.min(self.cap))
    }

    /// `argmin_{t <= trace_max} (t - trace)^2 / (2 eps) + lambda/2 t^2`.
    fn trace_prox(&self, trace: f64, eps: f64) -> f64 {
        (trace / (1.0 + eps * self.lambda)).min(self.trace_max)
    }
}

/// Root of `r - a + c r^(alpha - 1) = 0` on `[0, a]`: safeguarded Newton with
/// a bisection fallback.
fn power_prox_radius(a: f64, c: f64, alpha: f64) -> Result<f64> {
    let residual = |r: f64| r - a + c * r.powf(alpha - 1.0);
    let tol = NEWTON_TOL * a.max(1.0);
    let (mut lo, mut hi) = (0.0_f64, a);
    // Exact for alpha = 2 and inside the bracket for every alpha.
    let mut r = a / (1.0 + c * a.powf(alpha - 2.0));
    if !(r > lo && r < hi) {
        r = 0.5 * a;
    }
    for _ in 0..NEWTON_MAX_ITER {
        let f = residual(r);
        if f.abs() <= tol {
            return Ok(r);
        }
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        if hi - lo <= 4.0 * f64::EPSILON * a {
            return Ok(0.5 * (lo + hi));
        }
        let slope = 1.0 + c * (alpha - 1.0) * r.powf(alpha - 2.0);
        let next = r - f / slope;
        r = if next > lo && next < hi && next.is_finite() { next } else { 0.5 * (lo + hi) };
    }
    Err(Error::NonConvergence { iterations: NEWTON_MAX_ITER })
}
