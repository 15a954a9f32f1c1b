//! Collision detection among the segments of a closed polyline on the torus.

use crate::Point;

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    d[0].hypot(d[1])
}

fn segments_cross(a0: Point, a1: Point, b0: Point, b1: Point) -> bool {
    let da = sub(a1, a0);
    let db = sub(b1, b0);
    let d1 = cross(da, sub(b0, a0));
    let d2 = cross(da, sub(b1, a0));
    let d3 = cross(db, sub(a0, b0));
    let d4 = cross(db, sub(a1, b0));
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d3 != 0.0
}

/// Distance between two segments, zero when they cross.
pub fn segment_distance(a0: Point, a1: Point, b0: Point, b1: Point) -> f64 {
    if segments_cross(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Arc-length separation, in units of the contact distance, below which
/// two non-crossing segments of the same copy are neighbours rather than a contact.
const NEIGHBOUR_ARC: f64 = 4.0;

/// Whether two segments of the closed lifted polyline `pts` (or of one of
/// its periodic images) cross or come closer than `contact`. Segments that
/// share a vertex in the same image are exempt, and so are near misses
/// between segments that are close along the curve.
pub fn has_collision(pts: &[Point], contact: f64) -> bool {
    let m = pts.len();
    let seg = |j: usize| (pts[j], pts[(j + 1) % m]);
    let mut arc = Vec::with_capacity(m + 1);
    arc.push(0.0);
    for j in 0..m {
        let (a, b) = seg(j);
        arc.push(arc[j] + (b[0] - a[0]).hypot(b[1] - a[1]));
    }
    let total = arc[m];
    let arc_gap = |i: usize, j: usize| {
        let (i, j) = (i.min(j), i.max(j));
        (arc[j] - arc[i + 1]).min(total - (arc[j + 1] - arc[i]))
    };

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }

    // Copies of the curve shifted by lattice vectors that can reach the original.
    let mut shifts = vec![[0.0, 0.0]];
    for sx in -1..=1 {
        for sy in -1..=1 {
            if sx == 0 && sy == 0 {
                continue;
            }
            let (fx, fy) = (sx as f64, sy as f64);
            let overlap_x = lo[0] + fx <= hi[0] + contact && hi[0] + fx >= lo[0] - contact;
            let overlap_y = lo[1] + fy <= hi[1] + contact && hi[1] + fy >= lo[1] - contact;
            if overlap_x && overlap_y {
                shifts.push([fx, fy]);
            }
        }
    }

    // Sweep and prune on x: entries are (xmin, xmax, segment, shift).
    let mut entries: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(m * shifts.len());
    for (k, s) in shifts.iter().enumerate() {
        for j in 0..m {
            let (a, b) = seg(j);
            entries.push((a[0].min(b[0]) + s[0] - contact, a[0].max(b[0]) + s[0] + contact, j, k));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut active: Vec<usize> = Vec::new();
    for (idx, e) in entries.iter().enumerate() {
        active.retain(|&a| entries[a].1 >= e.0);
        for &a in &active {
            let o = entries[a];
            // Only pairs involving the unshifted curve matter.
            if o.3 != 0 && e.3 != 0 {
                continue;
            }
            if o.3 == 0 && e.3 == 0 {
                let (i, j) = (o.2, e.2);
                if i == j || (i + 1) % m == j || (j + 1) % m == i {
                    continue;
                }
            }
            let (a0, a1) = seg(o.2);
            let (b0, b1) = seg(e.2);
            let (sa, sb) = (shifts[o.3], shifts[e.3]);
            let a0 = [a0[0] + sa[0], a0[1] + sa[1]];
            let a1 = [a1[0] + sa[0], a1[1] + sa[1]];
            let b0 = [b0[0] + sb[0], b0[1] + sb[1]];
            let b1 = [b1[0] + sb[0], b1[1] + sb[1]];
            let ylo_a = a0[1].min(a1[1]) - contact;
            let yhi_a = a0[1].max(a1[1]) + contact;
            if b0[1].max(b1[1]) < ylo_a || b0[1].min(b1[1]) > yhi_a {
                continue;
            }
            let d = segment_distance(a0, a1, b0, b1);
            let same_copy = o.3 == 0 && e.3 == 0;
            if d == 0.0 || (d <= contact && !(same_copy && arc_gap(o.2, e.2) < NEIGHBOUR_ARC * contact)) {
                return true;
            }
        }
        active.push(idx);
    }
    false
}
