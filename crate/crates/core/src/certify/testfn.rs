//! Space-time test functions evaluated at the stored snapshot times.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::fields::{PeriodicGrid, ScalarField};
use crate::rheology::{MixturePotential, Phase, SymTensor2};
use crate::{Error, Result};

/// Natural cubic spline in time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl TimeProfile {
    pub fn constant(c: f64) -> Self {
        TimeProfile { knots: vec![0.0], values: vec![c], second: vec![0.0] }
    }

    /// Interpolates `values` at strictly increasing `knots` with zero second
    /// derivative at both ends; constant extension outside.
    pub fn natural(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n == 0 || values.len() != n || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("spline knots must be strictly increasing".into()));
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let m = n - 2;
            let mut c = vec![0.0; m];
            let mut d = vec![0.0; m];
            for i in 0..m {
                let (h0, h1) = (knots[i + 1] - knots[i], knots[i + 2] - knots[i + 1]);
                let rhs = 6.0 * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
                let diag = 2.0 * (h0 + h1);
                if i == 0 {
                    c[i] = h1 / diag;
                    d[i] = rhs / diag;
                } else {
                    let w = diag - h0 * c[i - 1];
                    c[i] = h1 / w;
                    d[i] = (rhs - h0 * d[i - 1]) / w;
                }
            }
            second[m] = d[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = d[i] - c[i] * second[i + 2];
            }
        }
        Ok(TimeProfile { knots, values, second })
    }

    fn locate(&self, t: f64) -> Option<(usize, f64, f64)> {
        let n = self.knots.len();
        if n < 2 || t <= self.knots[0] || t >= self.knots[n - 1] {
            return None;
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        Some((i, h, (t - self.knots[i]) / h))
    }

    pub fn value(&self, t: f64) -> f64 {
        let n = self.knots.len();
        match self.locate(t) {
            None if n == 1 || t <= self.knots[0] => self.values[0],
            None => self.values[n - 1],
            Some((i, h, s)) => {
                let (a, b) = (1.0 - s, s);
                a * self.values[i]
                    + b * self.values[i + 1]
                    + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
            }
        }
    }

    /// `[int psi l_-, int psi l_+]` over `[a, b]` with the hats
    /// `l_- = (b - t) / (b - a)` and `l_+ = (t - a) / (b - a)`. Gauss
    /// quadrature on each spline piece, so exact up to roundoff.
    pub fn hat_moments(&self, a: f64, b: f64) -> [f64; 2] {
        const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut cuts = vec![a];
        cuts.extend(self.knots.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        let mut out = [0.0; 2];
        for w in cuts.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (x, wt) in X.iter().zip(W) {
                let t = mid + half * x;
                let v = wt * half * self.value(t);
                let s = (t - a) / (b - a);
                out[0] += v * (1.0 - s);
                out[1] += v * s;
            }
        }
        out
    }

    /// One-sided at the end knots.
    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if n < 2 {
            return 0.0;
        }
        let t = t.clamp(self.knots[0], self.knots[n - 1]);
        let i = (self.knots.partition_point(|&k| k <= t).max(1) - 1).min(n - 2);
        let h = self.knots[i + 1] - self.knots[i];
        let s = (t - self.knots[i]) / h;
        let (a, b) = (1.0 - s, s);
        (self.values[i + 1] - self.values[i]) / h
            + (-(3.0 * a * a - 1.0) * self.second[i] + (3.0 * b * b - 1.0) * self.second[i + 1]) * h / 6.0
    }
}

/// Values of a test function at one stored time: per component the nodal
/// value, time derivative and gradient `[d/dx, d/dy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSample {
    pub value: Vec<Vec<f64>>,
    pub rate: Vec<Vec<f64>>,
    pub grad: Vec<[Vec<f64>; 2]>,
}

fn sym_of(g: &[[Vec<f64>; 2]]) -> Vec<SymTensor2> {
    (0..g[0][0].len()).map(|i| SymTensor2::new(g[0][0][i], 0.5 * (g[0][1][i] + g[1][0][i]), g[1][1][i])).collect()
}

impl TestSample {
    /// Symmetric gradient of a two-component sample.
    pub fn sym_gradient(&self) -> Vec<SymTensor2> {
        sym_of(&self.grad)
    }

    pub fn divergence(&self) -> Vec<f64> {
        (0..self.grad[0][0].len()).map(|i| self.grad[0][0][i] + self.grad[1][1][i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `profile(t) * space(x)` per component, with the spatial gradient precomputed.
    Separable { space: Vec<ScalarField>, grad: Vec<[Vec<f64>; 2]>, profile: TimeProfile },
    /// Nodal values and time derivatives at every stored time, `[time][component]`.
    Sampled { values: Vec<Vec<ScalarField>>, rates: Vec<Vec<ScalarField>> },
}

/// A scalar (one component) or vector (two components) test function on the
/// stored times of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: usize,
    times: Vec<f64>,
    shape: Shape,
    scale: f64,
    /// Largest Frobenius norm of the symmetric gradient over nodes and stored
    /// times (vector functions only).
    pub admissibility_scale: f64,
}

fn gradient_of(f: &ScalarField) -> [Vec<f64>; 2] {
    let g = f.gradient();
    [g.x, g.y]
}

impl TestFunction {
    pub fn separable(id: usize, times: Vec<f64>, space: Vec<ScalarField>, profile: TimeProfile) -> Result<Self> {
        if space.is_empty() || space.len() > 2 {
            return Err(Error::InvalidParameter("test functions have one or two components".into()));
        }
        let grad = space.iter().map(gradient_of).collect();
        let mut f = TestFunction {
            id,
            times,
            shape: Shape::Separable { space, grad, profile },
            scale: 1.0,
            admissibility_scale: 0.0,
        };
        f.admissibility_scale = f.sup_sym_gradient();
        Ok(f)
    }

    pub fn sampled(
        id: usize,
        times: Vec<f64>,
        values: Vec<Vec<ScalarField>>,
        rates: Vec<Vec<ScalarField>>,
    ) -> Result<Self> {
        if values.len() != times.len() || rates.len() != times.len() {
            return Err(Error::InvalidParameter("one sample per stored time is required".into()));
        }
        let comps = values.first().map_or(0, Vec::len);
        if !(1..=2).contains(&comps) || values.iter().chain(&rates).any(|v| v.len() != comps) {
            return Err(Error::InvalidParameter("inconsistent test function components".into()));
        }
        let mut f =
            TestFunction { id, times, shape: Shape::Sampled { values, rates }, scale: 1.0, admissibility_scale: 0.0 };
        f.admissibility_scale = f.sup_sym_gradient();
        Ok(f)
    }

    pub fn constant_scalar(id: usize, grid: PeriodicGrid, times: Vec<f64>, c: f64) -> Self {
        TestFunction::separable(id, times, vec![ScalarField::constant(grid, c)], TimeProfile::constant(1.0))
            .expect("one component")
    }

    pub fn zero_vector(id: usize, grid: PeriodicGrid, times: Vec<f64>) -> Self {
        let z = ScalarField::constant(grid, 0.0);
        TestFunction::separable(id, times, vec![z.clone(), z], TimeProfile::constant(0.0)).expect("two components")
    }

    pub fn components(&self) -> usize {
        match &self.shape {
            Shape::Separable { space, .. } => space.len(),
            Shape::Sampled { values, .. } => values[0].len(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Multiplies the function by `s`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self.admissibility_scale *= s.abs();
        self
    }

    pub fn sample(&self, k: usize) -> TestSample {
        let s = self.scale;
        let mul = |v: &[f64], c: f64| v.iter().map(|x| x * c).collect::<Vec<f64>>();
        match &self.shape {
            Shape::Separable { space, grad, profile } => {
                let t = self.times[k];
                let (a, b) = (s * profile.value(t), s * profile.derivative(t));
                TestSample {
                    value: space.iter().map(|f| mul(f.values(), a)).collect(),
                    rate: space.iter().map(|f| mul(f.values(), b)).collect(),
                    grad: grad.iter().map(|g| [mul(&g[0], a), mul(&g[1], a)]).collect(),
                }
            }
            Shape::Sampled { values, rates } => TestSample {
                value: values[k].iter().map(|f| mul(f.values(), s)).collect(),
                rate: rates[k].iter().map(|f| mul(f.values(), s)).collect(),
                grad: values[k]
                    .iter()
                    .map(|f| {
                        let g = gradient_of(f);
                        [mul(&g[0], s), mul(&g[1], s)]
                    })
                    .collect(),
            },
        }
    }

    /// The spatial factor of a separable function, scale included; the rate
    /// is left zero.
    pub(crate) fn spatial_sample(&self) -> Option<TestSample> {
        let Shape::Separable { space, grad, .. } = &self.shape else {
            return None;
        };
        let s = self.scale;
        let mul = |v: &[f64]| v.iter().map(|x| x * s).collect::<Vec<f64>>();
        Some(TestSample {
            value: space.iter().map(|f| mul(f.values())).collect(),
            rate: space.iter().map(|f| vec![0.0; f.values().len()]).collect(),
            grad: grad.iter().map(|g| [mul(&g[0]), mul(&g[1])]).collect(),
        })
    }

    /// Profile moments of a separable function on `[t_{k-1}, t_k]`:
    /// `[int psi l_-, int psi l_+]` and `[int psi' l_-, int psi' l_+]`. The
    /// second pair comes from integration by parts, so it sums to
    /// `psi(t_k) - psi(t_{k-1})` exactly. The scale lives in
    /// [`TestFunction::spatial_sample`].
    pub(crate) fn interval_weights(&self, k: usize) -> Option<([f64; 2], [f64; 2])> {
        let Shape::Separable { profile, .. } = &self.shape else {
            return None;
        };
        let (a, b) = (self.times[k - 1], self.times[k]);
        let m = profile.hat_moments(a, b);
        let mean = (m[0] + m[1]) / (b - a);
        let dm = [mean - profile.value(a), profile.value(b) - mean];
        Some((m, dm))
    }

    fn sup_sym_gradient(&self) -> f64 {
        if self.components() != 2 {
            return 0.0;
        }
        let sup = |ds: Vec<SymTensor2>| ds.iter().fold(0.0f64, |m, d| m.max(d.norm()));
        match &self.shape {
            // The spatial part is fixed, so the peak is its sup times the profile's.
            Shape::Separable { grad, profile, .. } => {
                let peak = self.times.iter().fold(0.0f64, |m, &t| m.max(profile.value(t).abs()));
                sup(sym_of(grad)) * peak * self.scale.abs()
            }
            Shape::Sampled { .. } => {
                (0..self.times.len()).map(|k| sup(self.sample(k).sym_gradient())).fold(0.0, f64::max)
            }
        }
    }

    /// Rescales a vector function so its symmetric gradient stays within half
    /// the common domain radius of both potentials, then checks that both
    /// potentials are finite on it everywhere.
    pub fn make_admissible(self, pots: &MixturePotential) -> Result<Self> {
        let r0 = pots.domain_radius();
        let f = if r0.is_finite() && self.admissibility_scale > 0.5 * r0 {
            let s = 0.5 * r0 / self.admissibility_scale;
            self.scaled(s)
        } else {
            self
        };
        f.check_admissible(pots)?;
        Ok(f)
    }

    /// `F1(D phi)` and `F2(D phi)` finite at every node and stored time.
    pub fn check_admissible(&self, pots: &MixturePotential) -> Result<()> {
        if self.components() != 2 {
            return Ok(());
        }
        for k in 0..self.times.len() {
            for d in self.sample(k).sym_gradient() {
                for phase in [Phase::One, Phase::Two] {
                    if !pots.eval(phase, &d).is_finite() {
                        return Err(Error::InadmissibleTest(format!(
                            "test {}: F is infinite at D phi = {d:?} (t = {})",
                            self.id, self.times[k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Random trigonometric polynomial with modes `max(|kx|, |ky|) <= cutoff`,
/// amplitudes decaying like `1 / (1 + |k|^2)`, scaled so the sum of mode
/// amplitudes is one. The same seed gives the same function on every grid.
fn random_field(grid: PeriodicGrid, cutoff: usize, rng: &mut ChaCha8Rng, with_mean: bool) -> ScalarField {
    let k = cutoff.min(grid.n() / 2 - 1) as i64;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut total = 0.0;
    for kx in 0..=k {
        for ky in -k..=k {
            // Half plane: each real mode once.
            if kx == 0 && ky < 0 {
                continue;
            }
            let w = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            if kx == 0 && ky == 0 {
                if with_mean {
                    coeffs[0] = Complex64::new(w * a, 0.0);
                    total += (w * a).abs();
                }
                continue;
            }
            total += w * a.hypot(b);
            // a cos + b sin = Re((a - ib) e^{i theta}).
            let c = Complex64::new(w * a, -w * b) * 0.5;
            coeffs[grid.mode_index(kx, ky)] = c;
            coeffs[grid.mode_index(-kx, -ky)] = c.conj();
        }
    }
    let f = ScalarField::from_spectrum(grid, &coeffs);
    if total > 0.0 {
        f.map(|v| v / total)
    } else {
        f
    }
}

/// Number of spline knots of random temporal profiles.
pub const PROFILE_KNOTS: usize = 4;

fn random_profile(times: &[f64], rng: &mut ChaCha8Rng) -> TimeProfile {
    let (t0, t1) = (times[0], *times.last().unwrap());
    if !(t1 > t0) {
        return TimeProfile::constant(rng.random_range(-1.0..1.0));
    }
    let knots: Vec<f64> = (0..PROFILE_KNOTS).map(|i| t0 + (t1 - t0) * i as f64 / (PROFILE_KNOTS - 1) as f64).collect();
    let values = (0..PROFILE_KNOTS).map(|_| rng.random_range(-1.0..1.0)).collect();
    TimeProfile::natural(knots, values).expect("increasing knots")
}

pub fn random_scalar(
    id: usize,
    grid: PeriodicGrid,
    times: &[f64],
    cutoff: usize,
    rng: &mut ChaCha8Rng,
) -> TestFunction {
    let space = random_field(grid, cutoff, rng, true);
    let profile = random_profile(times, rng);
    TestFunction::separable(id, times.to_vec(), vec![space], profile).expect("one component")
}

pub fn random_vector(
    id: usize,
    grid: PeriodicGrid,
    times: &[f64],
    cutoff: usize,
    rng: &mut ChaCha8Rng,
) -> TestFunction {
    let space = vec![random_field(grid, cutoff, rng, true), random_field(grid, cutoff, rng, true)];
    let profile = random_profile(times, rng);
    TestFunction::separable(id, times.to_vec(), space, profile).expect("two components")
}

/// Vector field of a two-component sample, for interpolation at atoms.
pub(crate) fn gradient_fields(grid: PeriodicGrid, s: &TestSample) -> [[ScalarField; 2]; 2] {
    let f = |v: &Vec<f64>| ScalarField::new(grid, v.clone()).expect("grid-sized sample");
    [[f(&s.grad[0][0]), f(&s.grad[0][1])], [f(&s.grad[1][0]), f(&s.grad[1][1])]]
}
