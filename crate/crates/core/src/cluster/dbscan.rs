//! DBSCAN with a uniform grid index.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cloud::{Partition, NOISE};
use crate::error::{Error, Result};
use crate::real::{dist2, Point, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanConfig {
    /// Neighborhood radius in nm.
    pub eps: f64,
    /// Neighbors (the point itself included) a core point needs.
    pub min_pts: usize,
}

impl DbscanConfig {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        let cfg = Self { eps, min_pts };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidConfig("min_pts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Buckets points into square cells of side `eps`.
struct Grid<'a, T> {
    points: &'a [Point<T>],
    eps2: T,
    inv: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a, T: Real> Grid<'a, T> {
    fn new(points: &'a [Point<T>], eps: f64) -> Self {
        let inv = 1.0 / eps;
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell_of(inv, p)).or_default().push(i);
        }
        Self {
            points,
            eps2: T::lit(eps * eps),
            inv,
            cells,
        }
    }

    fn cell_of(inv: f64, p: &Point<T>) -> (i64, i64) {
        ((p[0].as_f64() * inv).floor() as i64, (p[1].as_f64() * inv).floor() as i64)
    }

    /// Indices within eps of point `i`, itself included, in ascending order.
    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        let (cx, cy) = Self::cell_of(self.inv, &p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| dist2(p, self.points[j]) <= self.eps2));
                }
            }
        }
        out.sort_unstable();
    }
}

/// Density-based clustering. Clusters are numbered in the order they are
/// found scanning points by index; a border point reachable from several
/// clusters joins the one found first.
pub fn dbscan<T: Real>(points: &[Point<T>], cfg: &DbscanConfig) -> Result<Partition> {
    cfg.validate()?;
    const UNSEEN: i64 = -2;
    let n = points.len();
    let grid = Grid::new(points, cfg.eps);
    let mut labels = vec![UNSEEN; n];
    let mut next = 0i64;
    let mut nbrs = Vec::new();
    let mut inner = Vec::new();
    let mut queue = Vec::new();
    for i in 0..n {
        if labels[i] != UNSEEN {
            continue;
        }
        grid.neighbors(i, &mut nbrs);
        if nbrs.len() < cfg.min_pts {
            labels[i] = NOISE;
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = c;
        queue.clear();
        queue.extend(nbrs.iter().rev().copied().filter(|&j| j != i));
        while let Some(q) = queue.pop() {
            if labels[q] == NOISE {
                labels[q] = c;
                continue;
            }
            if labels[q] != UNSEEN {
                continue;
            }
            labels[q] = c;
            grid.neighbors(q, &mut inner);
            if inner.len() >= cfg.min_pts {
                queue.extend(inner.iter().rev().copied().filter(|&j| labels[j] == UNSEEN || labels[j] == NOISE));
            }
        }
    }
    Partition::new(labels)
}
