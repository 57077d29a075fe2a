//! Convex hulls and the intersection-over-union of matched clusters.

use super::pairing::PairingResult;
use crate::cloud::Partition;
use crate::real::{Point, Real};

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area of a simple polygon (absolute value).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s.abs()
}

/// Intersection of two counter-clockwise convex polygons (Sutherland-Hodgman).
pub fn convex_intersection(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    for k in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % clip.len()];
        let input = std::mem::take(&mut out);
        for m in 0..input.len() {
            let cur = input[m];
            let prev = input[(m + input.len() - 1) % input.len()];
            let cin = cross(a, b, cur) >= 0.0;
            let pin = cross(a, b, prev) >= 0.0;
            if cin {
                if !pin {
                    out.push(line_hit(prev, cur, a, b));
                }
                out.push(cur);
            } else if pin {
                out.push(line_hit(prev, cur, a, b));
            }
        }
    }
    out
}

fn line_hit(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// IoU of the convex hulls of two point sets. Degenerate hulls score 1 when the
/// centroids coincide within 1e-9 nm and 0 otherwise.
pub fn hull_iou(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let ha = convex_hull(a);
    let hb = convex_hull(b);
    let (aa, ab) = (polygon_area(&ha), polygon_area(&hb));
    if aa == 0.0 || ab == 0.0 {
        let c = |p: &[[f64; 2]]| {
            let n = p.len().max(1) as f64;
            p.iter().fold([0.0, 0.0], |s, q| [s[0] + q[0] / n, s[1] + q[1] / n])
        };
        let (ca, cb) = (c(a), c(b));
        return if (ca[0] - cb[0]).hypot(ca[1] - cb[1]) <= 1e-9 { 1.0 } else { 0.0 };
    }
    let inter = polygon_area(&convex_intersection(&ha, &hb));
    let union = aa + ab - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Mean hull IoU over all clusters: matched pairs contribute their IoU, every
/// unmatched cluster on either side contributes 0. No clusters at all scores 1.
pub fn iou_hulls<T: Real>(pairing: &PairingResult, gt: &Partition, pred: &Partition, points: &[Point<T>]) -> f64 {
    let units = pairing.tp() + pairing.fp.len() + pairing.fn_.len();
    if units == 0 {
        return 1.0;
    }
    let gc = gt.clusters();
    let pc = pred.clusters();
    let members = |idx: &[usize]| -> Vec<[f64; 2]> {
        idx.iter().map(|&i| [points[i][0].as_f64(), points[i][1].as_f64()]).collect()
    };
    let total: f64 = pairing
        .matches
        .iter()
        .map(|&(g, p, _)| hull_iou(&members(&gc[&g]), &members(&pc[&p])))
        .sum();
    total / units as f64
}
