use super::PeriodicGrid;
use crate::Point;

/// Periodic 4x4 Lagrange stencil (bicubic) at an off-grid point.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    ix: [usize; 4],
    iy: [usize; 4],
    wx: [f64; 4],
    wy: [f64; 4],
    n: usize,
}

fn lagrange_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

fn axis(n: usize, coord: f64) -> ([usize; 4], [f64; 4]) {
    let s = coord * n as f64;
    let mut base = s.floor();
    let mut t = s - base;
    let nearest = s.round();
    // Snap points within rounding distance of a node so nodal values are reproduced exactly.
    if (s - nearest).abs() <= 1e-12 * n as f64 {
        base = nearest;
        t = 0.0;
    }
    // n is a power of two, so masking wraps negative offsets too.
    let mask = n as i64 - 1;
    let b = base as i64;
    let idx = [-1, 0, 1, 2].map(|o| ((b + o) & mask) as usize);
    (idx, lagrange_weights(t))
}

impl Stencil {
    pub fn new(grid: &PeriodicGrid, p: Point) -> Stencil {
        let (ix, wx) = axis(grid.n(), p[0]);
        let (iy, wy) = axis(grid.n(), p[1]);
        Stencil { ix, iy, wx, wy, n: grid.n() }
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            if self.wx[a] == 0.0 {
                continue;
            }
            let row = self.ix[a] * self.n;
            let mut inner = 0.0;
            for b in 0..4 {
                if self.wy[b] != 0.0 {
                    inner += self.wy[b] * values[row + self.iy[b]];
                }
            }
            acc += self.wx[a] * inner;
        }
        acc
    }

    /// Smallest nodal value among the 16 stencil nodes.
    pub fn min(&self, values: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for a in 0..4 {
            for b in 0..4 {
                m = m.min(values[self.ix[a] * self.n + self.iy[b]]);
            }
        }
        m
    }
}
