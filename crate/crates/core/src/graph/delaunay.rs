use std::collections::{BTreeSet, HashMap};

use delaunator::{triangulate, Point as DPoint};

use crate::real::{dist2, Point, Real};

/// Undirected Delaunay edges as sorted `(i, j)` pairs with `i < j`.
///
/// Exact duplicate coordinates are triangulated once and every copy is joined to
/// its first occurrence by a zero-length edge. With fewer than three distinct
/// positions, or when all positions are collinear, the result is a symmetric
/// k-nearest-neighbor graph with `k = min(3, n - 1)`.
pub fn delaunay_edges<T: Real>(points: &[Point<T>]) -> Vec<(usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }

    let mut first_of: HashMap<(u64, u64), usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut rep = vec![0usize; n];
    for (i, p) in points.iter().enumerate() {
        // + 0.0 folds -0.0 into 0.0
        let key = ((p[0].as_f64() + 0.0).to_bits(), (p[1].as_f64() + 0.0).to_bits());
        let r = *first_of.entry(key).or_insert_with(|| {
            unique.push(i);
            i
        });
        rep[i] = r;
    }

    if unique.len() < 3 {
        return knn_edges(points, 3.min(n - 1));
    }

    let dpts: Vec<DPoint> = unique
        .iter()
        .map(|&i| DPoint {
            x: points[i][0].as_f64(),
            y: points[i][1].as_f64(),
        })
        .collect();
    let tri = triangulate(&dpts);
    if tri.triangles.is_empty() {
        return knn_edges(points, 3.min(n - 1));
    }

    let mut edges = BTreeSet::new();
    let mut touched = vec![false; unique.len()];
    for t in tri.triangles.chunks_exact(3) {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            touched[a] = true;
            touched[b] = true;
            edges.insert(ordered(unique[a], unique[b]));
        }
    }
    // near-coincident points that the triangulator skipped get linked to their nearest neighbor
    for (u, &hit) in touched.iter().enumerate() {
        if !hit {
            let i = unique[u];
            if let Some(j) = nearest(points, i, &unique) {
                edges.insert(ordered(i, j));
            }
        }
    }
    for (i, &r) in rep.iter().enumerate() {
        if r != i {
            edges.insert(ordered(i, r));
        }
    }
    edges.into_iter().collect()
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn nearest<T: Real>(points: &[Point<T>], i: usize, candidates: &[usize]) -> Option<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&j| j != i)
        .min_by(|&a, &b| {
            dist2(points[i], points[a])
                .partial_cmp(&dist2(points[i], points[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
}

/// Symmetrized k-nearest-neighbor edges, ties broken by index.
pub fn knn_edges<T: Real>(points: &[Point<T>], k: usize) -> Vec<(usize, usize)> {
    let n = points.len();
    let mut edges = BTreeSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| {
            dist2(points[i], points[a])
                .partial_cmp(&dist2(points[i], points[b]))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            edges.insert(ordered(i, j));
        }
    }
    edges.into_iter().collect()
}
