mod common;

use std::collections::BTreeSet;

use miro::graph::{build_graph, delaunay_edges, DeltaMode, GraphConfig};
use miro::PointCloud;
use ndarray::Axis;

/// Delaunay edges by brute force: a triangle belongs to the triangulation when
/// its circumcircle holds no other point.
fn brute_force_delaunay(pts: &[[f64; 2]]) -> BTreeSet<(usize, usize)> {
    let n = pts.len();
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let [ax, ay] = pts[a];
                let [bx, by] = pts[b];
                let [cx, cy] = pts[c];
                let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if d.abs() < 1e-12 {
                    continue;
                }
                let a2 = ax * ax + ay * ay;
                let b2 = bx * bx + by * by;
                let c2 = cx * cx + cy * cy;
                let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                let r2 = (ax - ux).powi(2) + (ay - uy).powi(2);
                let empty = (0..n)
                    .filter(|&k| k != a && k != b && k != c)
                    .all(|k| (pts[k][0] - ux).powi(2) + (pts[k][1] - uy).powi(2) > r2 * (1.0 + 1e-9));
                if empty {
                    edges.extend([(a, b), (a, c), (b, c)]);
                }
            }
        }
    }
    edges
}

fn normalized(edges: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect()
}

#[test]
fn delaunay_matches_empty_circumcircle_oracle() {
    let mut rng = common::rng(11);
    for _ in 0..20 {
        let pts = common::random_points(&mut rng, 50, 1000.0);
        assert_eq!(normalized(&delaunay_edges(&pts)), brute_force_delaunay(&pts));
    }
}

#[test]
fn percentile_filter_does_not_raise_degree() {
    let mut rng = common::rng(12);
    let pts = common::random_points(&mut rng, 200, 1000.0);
    let all = normalized(&delaunay_edges(&pts));
    let cloud = PointCloud::from_positions(&pts).unwrap();
    let g = build_graph(&cloud, &GraphConfig::default()).unwrap();
    let full_degree = 2.0 * all.len() as f64 / 200.0;
    let degree = g.n_edges() as f64 / 200.0;
    assert!(degree <= full_degree && full_degree < 6.0, "{degree} vs {full_degree}");
    // every kept edge is a Delaunay edge
    assert!(normalized(g.edges()).is_subset(&all));
}

#[test]
fn node_features_are_unit_norm_columns() {
    let mut rng = common::rng(13);
    let pts = common::random_points(&mut rng, 120, 500.0);
    let cfg = GraphConfig {
        delta_mode: DeltaMode::Fixed(1e6),
        n_eigs: 5,
    };
    let g = build_graph(&PointCloud::from_positions(&pts).unwrap(), &cfg).unwrap();
    for col in g.node_feats().axis_iter(Axis(1)) {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9, "{norm}");
    }
}
