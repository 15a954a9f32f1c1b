//! Periodic cubic spline through closed point sequences.

/// Solves the cyclic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` (indices mod n)
/// by Sherman-Morrison on the Thomas algorithm.
fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;

    let thomas = |r: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = upper[0] / b[0];
        d[0] = r[0] / b[0];
        for i in 1..n {
            let m = b[i] - lower[i] * c[i - 1];
            c[i] = if i < n - 1 { upper[i] / m } else { 0.0 };
            d[i] = (r[i] - lower[i] * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };
    let x = thomas(rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(&u);
    let factor = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(a, b)| a - factor * b).collect()
}

/// Closed spline through `values` at knots `s` (strictly increasing, with
/// period `period` closing the last interval back to the first knot).
pub struct PeriodicSpline {
    s: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    period: f64,
}

impl PeriodicSpline {
    pub fn new(s: Vec<f64>, values: Vec<f64>, period: f64) -> Self {
        let n = s.len();
        let h: Vec<f64> = (0..n).map(|i| if i + 1 < n { s[i + 1] - s[i] } else { s[0] + period - s[n - 1] }).collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hp = h[(i + n - 1) % n];
            let hn = h[i];
            lower[i] = hp;
            diag[i] = 2.0 * (hp + hn);
            upper[i] = hn;
            let next = values[(i + 1) % n];
            let prev = values[(i + n - 1) % n];
            rhs[i] = 6.0 * ((next - values[i]) / hn - (values[i] - prev) / hp);
        }
        let second = solve_cyclic(&lower, &diag, &upper, &rhs);
        PeriodicSpline { s, values, second, period }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.s.len();
        let t = self.s[0] + (t - self.s[0]).rem_euclid(self.period);
        let i = self.s.partition_point(|&k| k <= t).max(1) - 1;
        let (j, s1) = if i + 1 < n { (i + 1, self.s[i + 1]) } else { (0, self.s[0] + self.period) };
        let h = s1 - self.s[i];
        let a = (s1 - t) / h;
        let b = (t - self.s[i]) / h;
        a * self.values[i]
            + b * self.values[j]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[j]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cyclic_solver_matches_dense_product() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| 0.5 - 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + i as f64).collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| lower[i] * x_true[(i + n - 1) % n] + diag[i] * x_true[i] + upper[i] * x_true[(i + 1) % n])
            .collect();
        let x = solve_cyclic(&lower, &diag, &upper, &rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolates_knots_and_smooth_periodic_data() {
        let n = 40;
        let s: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 + 0.004 * (i as f64).sin()).collect();
        let v: Vec<f64> = s.iter().map(|t| (2.0 * PI * t).cos()).collect();
        let sp = PeriodicSpline::new(s.clone(), v.clone(), 1.0);
        for (t, y) in s.iter().zip(&v) {
            assert!((sp.eval(*t) - y).abs() < 1e-13);
        }
        for k in 0..200 {
            let t = k as f64 / 200.0 + 0.0013;
            assert!((sp.eval(t) - (2.0 * PI * t).cos()).abs() < 1e-5);
        }
    }
}
