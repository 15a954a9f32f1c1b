//! Front-tracked interface: a closed marker polyline on the torus, its
//! rasterized indicator and the curve-carried varifold.
//!
//! Markers are stored wrapped into `[0,1)^2`; segments are formed from
//! minimal-image differences, so a curve crossing the seam keeps continuous
//! lengths and normals. The unit normal `z` points out of the phase-one region.

mod intersect;
mod spline;
mod varifold;

use rayon::prelude::*;

use crate::fields::{wrap, PeriodicGrid, ScalarField};
use crate::flowmap::{forward_point, CharacteristicConfig, Velocity};
use crate::{Error, Point, Result};

pub use intersect::segment_distance;
pub use varifold::{compatibility_residual, first_variation, DiscreteVarifold, VarifoldAtom};

/// Minimum number of markers on a curve.
pub const MIN_MARKERS: usize = 16;
/// Contact distance, as a fraction of the target spacing, below which two
/// segments count as colliding.
pub const CONTACT_FRACTION: f64 = 0.25;

fn minimal_image(d: f64) -> f64 {
    d - d.round()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerCurve {
    points: Vec<Point>,
    target_spacing: f64,
}

impl MarkerCurve {
    /// Builds a curve from markers, reversing it if it runs clockwise.
    /// Rejects fewer than 16 markers and self-intersecting polylines.
    pub fn new(points: Vec<Point>, target_spacing: f64) -> Result<Self> {
        if points.len() < MIN_MARKERS {
            return Err(Error::InvalidParameter(format!(
                "a marker curve needs at least {MIN_MARKERS} points, got {}",
                points.len()
            )));
        }
        if !(target_spacing.is_finite() && target_spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("target spacing must be > 0, got {target_spacing}")));
        }
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidParameter("marker coordinates must be finite".into()));
        }
        let mut c = MarkerCurve { points: points.into_iter().map(wrap).collect(), target_spacing };
        if c.signed_area() < 0.0 {
            c.points.reverse();
        }
        if !c.is_simple() {
            return Err(Error::SelfIntersection { step: 0 });
        }
        Ok(c)
    }

    pub fn circle(center: Point, radius: f64, count: usize, target_spacing: f64) -> Result<Self> {
        Self::ellipse(center, radius, radius, 0.0, count, target_spacing)
    }

    /// Ellipse with semi-axes `a`, `b`, rotated by `angle` radians.
    pub fn ellipse(center: Point, a: f64, b: f64, angle: f64, count: usize, target_spacing: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a < 0.5 && b < 0.5) {
            return Err(Error::InvalidParameter(format!("ellipse semi-axes must lie in (0, 0.5), got {a}, {b}")));
        }
        let (sn, cs) = angle.sin_cos();
        let pts = (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                let (x, y) = (a * th.cos(), b * th.sin());
                [center[0] + cs * x - sn * y, center[1] + sn * x + cs * y]
            })
            .collect();
        Self::new(pts, target_spacing)
    }

    /// Polygon through `vertices` (taken as plane coordinates, so edges may
    /// cross the seam), with edges subdivided to the target spacing.
    pub fn polygon(vertices: &[Point], target_spacing: f64) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter("a polygon needs at least three vertices".into()));
        }
        let lifted = vertices;
        let total: f64 = (0..lifted.len())
            .map(|i| {
                let (a, b) = (lifted[i], lifted[(i + 1) % lifted.len()]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum();
        let spacing = target_spacing.min(total / MIN_MARKERS as f64);
        let mut pts = Vec::new();
        for i in 0..lifted.len() {
            let (a, b) = (lifted[i], lifted[(i + 1) % lifted.len()]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let pieces = ((len / spacing).ceil() as usize).max(1);
            for k in 0..pieces {
                let t = k as f64 / pieces as f64;
                pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        Self::new(pts, target_spacing)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn target_spacing(&self) -> f64 {
        self.target_spacing
    }

    pub fn contact_tolerance(&self) -> f64 {
        CONTACT_FRACTION * self.target_spacing
    }

    /// Minimal-image vector of segment `j`, from marker `j` to marker `j+1`.
    pub fn segment(&self, j: usize) -> [f64; 2] {
        let a = self.points[j];
        let b = self.points[(j + 1) % self.points.len()];
        [minimal_image(b[0] - a[0]), minimal_image(b[1] - a[1])]
    }

    /// Continuous lift of the markers into the plane starting from marker 0.
    pub fn lifted(&self) -> Vec<Point> {
        lift(&self.points)
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let d = self.segment(j);
                d[0].hypot(d[1])
            })
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// Shoelace area of the lifted polyline; positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        let p = self.lifted();
        let o = p[0];
        let mut acc = 0.0;
        for j in 0..p.len() {
            let a = [p[j][0] - o[0], p[j][1] - o[1]];
            let d = self.segment(j);
            acc += a[0] * d[1] - a[1] * d[0];
        }
        0.5 * acc
    }

    /// No two segments (including periodic images) cross or come within the contact tolerance.
    pub fn is_simple(&self) -> bool {
        !intersect::has_collision(&self.lifted(), self.contact_tolerance())
    }

    pub fn spacing_in_bounds(&self) -> bool {
        let t = self.target_spacing;
        self.segment_lengths().iter().all(|&l| l >= 0.5 * t && l <= 2.0 * t)
    }

    /// Redistributes markers along a periodic cubic spline (chord-length
    /// parameter), with `max(16, round(L / target))` markers.
    pub fn resample(&self) -> MarkerCurve {
        let p = self.lifted();
        let m = p.len();
        let lengths = self.segment_lengths();
        let total: f64 = lengths.iter().sum();
        let mut s = Vec::with_capacity(m);
        let mut acc = 0.0;
        for l in &lengths {
            s.push(acc);
            acc += l;
        }
        let closing = self.segment(m - 1);
        let end = [p[m - 1][0] + closing[0], p[m - 1][1] + closing[1]];
        // The lifted curve closes onto p[0] for contractible curves; any
        // lattice offset is carried as a linear drift in the parameter.
        let drift = [end[0] - p[0][0], end[1] - p[0][1]];
        let xs: Vec<f64> = p.iter().zip(&s).map(|(q, si)| q[0] - drift[0] * si / total).collect();
        let ys: Vec<f64> = p.iter().zip(&s).map(|(q, si)| q[1] - drift[1] * si / total).collect();
        let sx = spline::PeriodicSpline::new(s.clone(), xs, total);
        let sy = spline::PeriodicSpline::new(s, ys, total);
        let count = MIN_MARKERS.max((total / self.target_spacing).round() as usize);
        let points = (0..count)
            .map(|k| {
                let t = total * k as f64 / count as f64;
                wrap([sx.eval(t) + drift[0] * t / total, sy.eval(t) + drift[1] * t / total])
            })
            .collect();
        MarkerCurve { points, target_spacing: self.target_spacing }
    }

    /// Moves every marker along the forward flow over `[t0, t0 + dt]`, then
    /// resamples if the spacing left `[0.5, 2]` times the target.
    pub fn advect(
        &self,
        vel: &impl Velocity,
        t0: f64,
        dt: f64,
        cfg: &CharacteristicConfig,
        step: usize,
    ) -> Result<MarkerCurve> {
        let moved: Result<Vec<Point>> =
            self.points.par_iter().map(|&p| forward_point(vel, p, t0, t0 + dt, cfg).map(wrap)).collect();
        let mut c = MarkerCurve { points: moved?, target_spacing: self.target_spacing };
        if !c.is_simple() {
            return Err(Error::SelfIntersection { step });
        }
        if !c.spacing_in_bounds() {
            c = c.resample();
            if !c.is_simple() {
                return Err(Error::SelfIntersection { step });
            }
        }
        Ok(c)
    }

    /// Nodal indicator of the enclosed region, exactly 0 or 1, by even-odd
    /// scanlines over the periodic images of the lifted polyline.
    pub fn rasterize(&self, grid: &PeriodicGrid) -> ScalarField {
        let p = self.lifted();
        let m = p.len();
        let h = grid.h();
        let n = grid.n();
        let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for q in &p {
            xlo = xlo.min(q[0]);
            xhi = xhi.max(q[0]);
            ylo = ylo.min(q[1]);
            yhi = yhi.max(q[1]);
        }
        let columns: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|ix| {
                let mut col = vec![0.0; n];
                let x = ix as f64 * h;
                let mut shift = (xlo - x).ceil();
                while x + shift <= xhi {
                    let xs = x + shift;
                    let mut ys: Vec<f64> = Vec::new();
                    for j in 0..m {
                        let a = p[j];
                        let d = self.segment(j);
                        let b = [a[0] + d[0], a[1] + d[1]];
                        if (a[0] <= xs && xs < b[0]) || (b[0] <= xs && xs < a[0]) {
                            ys.push(a[1] + (xs - a[0]) / (b[0] - a[0]) * (b[1] - a[1]));
                        }
                    }
                    ys.sort_by(f64::total_cmp);
                    for (iy, c) in col.iter_mut().enumerate() {
                        let y = iy as f64 * h;
                        let mut sy = (ylo - y).ceil();
                        while y + sy <= yhi {
                            if ys.partition_point(|&v| v < y + sy) % 2 == 1 {
                                *c = 1.0;
                            }
                            sy += 1.0;
                        }
                    }
                    shift += 1.0;
                }
                col
            })
            .collect();
        let values = columns.into_iter().flatten().collect();
        ScalarField::new(*grid, values).expect("one value per node")
    }

    /// One atom per segment at its midpoint, with the outward normal and the segment length.
    pub fn varifold(&self) -> DiscreteVarifold {
        let atoms = (0..self.len())
            .map(|j| {
                let a = self.points[j];
                let d = self.segment(j);
                let w = d[0].hypot(d[1]);
                VarifoldAtom { x: wrap([a[0] + 0.5 * d[0], a[1] + 0.5 * d[1]]), z: [d[1] / w, -d[0] / w], w }
            })
            .collect();
        DiscreteVarifold { atoms }
    }

    /// Markers translated by `shift` (mod 1).
    pub fn translated(&self, shift: [f64; 2]) -> MarkerCurve {
        MarkerCurve {
            points: self.points.iter().map(|p| wrap([p[0] + shift[0], p[1] + shift[1]])).collect(),
            target_spacing: self.target_spacing,
        }
    }
}

fn lift(points: &[Point]) -> Vec<Point> {
    let mut out = Vec::with_capacity(points.len());
    let mut cur = points[0];
    out.push(cur);
    for w in points.windows(2) {
        cur = [cur[0] + minimal_image(w[1][0] - w[0][0]), cur[1] + minimal_image(w[1][1] - w[0][1])];
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::VectorField;
    use crate::flowmap::{AnalyticVelocity, VelocitySegment};
    use std::f64::consts::PI;

    fn circle(m: usize) -> MarkerCurve {
        let r = 0.25;
        MarkerCurve::circle([0.5, 0.5], r, m, 2.0 * PI * r / m as f64).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(MarkerCurve::new(vec![[0.1, 0.1]; 4], 0.01).is_err());
        let cw: Vec<Point> = (0..32)
            .map(|k| {
                let t = -2.0 * PI * k as f64 / 32.0;
                [0.5 + 0.2 * t.cos(), 0.5 + 0.2 * t.sin()]
            })
            .collect();
        let c = MarkerCurve::new(cw, 0.04).unwrap();
        assert!(c.signed_area() > 0.0);
        let bowtie = [[0.2, 0.2], [0.6, 0.6], [0.6, 0.2], [0.2, 0.6]];
        assert!(matches!(MarkerCurve::polygon(&bowtie, 0.05), Err(Error::SelfIntersection { .. })));
    }

    #[test]
    fn perimeter_of_circle_and_square() {
        let c = circle(512);
        assert!((c.perimeter() / (0.5 * PI) - 1.0).abs() < 1e-3);
        let sq = MarkerCurve::polygon(&[[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]], 0.05).unwrap();
        assert!((sq.perimeter() - 2.0).abs() < 1e-14);
        let fine = circle(1024);
        assert!((fine.perimeter() - c.perimeter()).abs() < 1e-4);
    }

    #[test]
    fn perimeter_invariant_under_rotation_of_indices_and_translation() {
        let c = circle(128);
        let mut pts = c.points().to_vec();
        pts.rotate_left(37);
        let r = MarkerCurve::new(pts, c.target_spacing()).unwrap();
        assert!((r.perimeter() - c.perimeter()).abs() < 1e-13);
        let t = c.translated([0.61, 0.37]);
        assert!((t.perimeter() - c.perimeter()).abs() < 1e-12);
        assert!((t.signed_area() - c.signed_area()).abs() < 1e-12);
    }

    #[test]
    fn rasterized_area_matches_circle() {
        let g = PeriodicGrid::new(64).unwrap();
        let chi = circle(512).rasterize(&g);
        assert!(chi.values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!((chi.integrate() - PI / 16.0).abs() < 2.0 * g.h());
    }

    #[test]
    fn rasterization_handles_the_seam() {
        let g = PeriodicGrid::new(64).unwrap();
        let c = circle(256);
        let wrapped = c.translated([0.5, 0.5]);
        let a = c.rasterize(&g).integrate();
        let b = wrapped.rasterize(&g).integrate();
        assert!((a - b).abs() < 1e-12);
        assert!((b - wrapped.signed_area()).abs() <= 4.0 * g.h() * wrapped.perimeter());
    }

    #[test]
    fn tiny_curve_marks_at_most_a_few_nodes() {
        let g = PeriodicGrid::new(64).unwrap();
        let c = MarkerCurve::circle([0.503, 0.507], 0.3 * g.h(), 16, 0.1 * g.h()).unwrap();
        assert!(c.rasterize(&g).integrate() <= 4.0 * g.h() * g.h());
    }

    #[test]
    fn near_full_domain_curve() {
        let g = PeriodicGrid::new(32).unwrap();
        let e = 0.495;
        let c = MarkerCurve::polygon(
            &[[0.5 - e, 0.5 - e], [0.5 + e, 0.5 - e], [0.5 + e, 0.5 + e], [0.5 - e, 0.5 + e]],
            0.05,
        );
        // The square nearly touches its own periodic images.
        assert!(matches!(c, Err(Error::SelfIntersection { .. })));
        let e = 0.45;
        let c = MarkerCurve::polygon(
            &[[0.5 - e, 0.5 - e], [0.5 + e, 0.5 - e], [0.5 + e, 0.5 + e], [0.5 - e, 0.5 + e]],
            0.05,
        )
        .unwrap();
        let chi = c.rasterize(&g);
        for (i, p) in g.nodes().enumerate() {
            let inside = (p[0] - 0.5).abs() < e && (p[1] - 0.5).abs() < e;
            assert_eq!(chi.values()[i], if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn resampling_keeps_the_shape() {
        let c = circle(64);
        let coarse = MarkerCurve { points: c.points().to_vec(), target_spacing: c.target_spacing() / 3.0 };
        let r = coarse.resample();
        assert!(r.spacing_in_bounds());
        for p in r.points() {
            let d = (p[0] - 0.5).hypot(p[1] - 0.5);
            assert!((d - 0.25).abs() < 1e-5, "{d}");
        }
        assert!(r.signed_area() > 0.0);
    }

    #[test]
    fn advection_by_zero_and_constant_flow() {
        let g = PeriodicGrid::new(64).unwrap();
        let c = circle(128);
        let cfg = CharacteristicConfig::for_grid(&g);
        let still = VelocitySegment::frozen(0.0, 1.0, VectorField::zeros(g));
        assert_eq!(c.advect(&still, 0.0, 0.01, &cfg, 1).unwrap(), c);
        let moving = VelocitySegment::frozen(0.0, 1.0, VectorField::from_fn(g, |_| [0.5, 0.25]));
        let t = c.advect(&moving, 0.0, 0.01, &cfg, 1).unwrap();
        let expected = c.translated([0.005, 0.0025]);
        for (a, b) in t.points().iter().zip(expected.points()) {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_preserves_circle() {
        let c = MarkerCurve::circle([0.5, 0.5], 0.25, 512, 2.0 * PI * 0.25 / 512.0).unwrap();
        let vel = AnalyticVelocity {
            velocity: |_: f64, p: Point| [-(p[1] - 0.5), p[0] - 0.5],
            divergence: |_: f64, _: Point| 0.0,
        };
        let cfg = CharacteristicConfig { substeps: 1, max_displacement: 0.01 };
        let mut cur = c;
        let dt = 0.01;
        for k in 0..100 {
            cur = cur.advect(&vel, k as f64 * dt, dt, &cfg, k).unwrap();
        }
        for p in cur.points() {
            assert!(((p[0] - 0.5).hypot(p[1] - 0.5) - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn divergence_free_advection_keeps_area() {
        let c = MarkerCurve::circle([0.4, 0.55], 0.2, 512, 2.0 * PI * 0.2 / 512.0).unwrap();
        let vel = AnalyticVelocity {
            velocity: |_: f64, p: Point| [0.3 * (2.0 * PI * p[1]).sin(), 0.2 * (2.0 * PI * p[0]).cos()],
            divergence: |_: f64, _: Point| 0.0,
        };
        let cfg = CharacteristicConfig { substeps: 1, max_displacement: 0.01 };
        let a0 = c.signed_area();
        let mut cur = c;
        let dt = 1e-3;
        for k in 0..200 {
            cur = cur.advect(&vel, k as f64 * dt, dt, &cfg, k).unwrap();
        }
        assert!((cur.signed_area() - a0).abs() / 0.2 < 1e-4);
    }

    #[test]
    fn approaching_images_are_a_topology_stop() {
        // Pure x-stretching towards the seam drives the ends of a wide ellipse together.
        let c = MarkerCurve::ellipse([0.5, 0.5], 0.44, 0.05, 0.0, 256, 0.01).unwrap();
        let vel = AnalyticVelocity {
            velocity: |_: f64, p: Point| [0.5 * (2.0 * PI * (p[0] - 0.5)).sin(), 0.0],
            divergence: |_: f64, p: Point| PI * (2.0 * PI * (p[0] - 0.5)).cos(),
        };
        let cfg = CharacteristicConfig { substeps: 1, max_displacement: 0.01 };
        let mut cur = c;
        let mut stopped = None;
        for k in 0..2000 {
            match cur.advect(&vel, k as f64 * 0.01, 0.01, &cfg, k) {
                Ok(next) => cur = next,
                Err(Error::SelfIntersection { step }) => {
                    stopped = Some(step);
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert!(stopped.is_some());
    }
}
