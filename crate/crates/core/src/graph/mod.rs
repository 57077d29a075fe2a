//! Graph representation of a point cloud: filtered Delaunay edges, Laplacian
//! node features and distance/direction edge features.

mod delaunay;
pub mod eigen;
pub mod spectral;

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use delaunay::{delaunay_edges, knn_edges};
pub use spectral::{laplacian_features, laplacian_spectrum, Spectrum};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::real::{dist, Point, Real};

/// How the edge-length threshold δ is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// Fixed threshold in nm.
    Fixed(f64),
    /// Percentile (0, 100) of this cloud's triangulation edge lengths.
    Percentile(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub delta_mode: DeltaMode,
    pub n_eigs: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            delta_mode: DeltaMode::Percentile(95.0),
            n_eigs: 5,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        match self.delta_mode {
            DeltaMode::Fixed(d) if !(d > 0.0 && d.is_finite()) => {
                return Err(Error::InvalidConfig(format!("delta must be > 0, got {d}")))
            }
            DeltaMode::Percentile(p) if !(p > 0.0 && p < 100.0) => {
                return Err(Error::InvalidConfig(format!("percentile must be in (0, 100), got {p}")))
            }
            _ => {}
        }
        if self.n_eigs == 0 {
            return Err(Error::InvalidConfig("n_eigs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Model input: coordinates, node features, directed edges and edge features.
///
/// Every undirected edge appears twice, `(i, j)` and `(j, i)`. Edge features are
/// `[distance_nm, dir_x, dir_y]` with the unit direction pointing from `i` to `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocGraph<T> {
    coords: Vec<Point<T>>,
    node_feats: Array2<T>,
    edges: Vec<(usize, usize)>,
    edge_feats: Array2<T>,
}

impl<T: Real> LocGraph<T> {
    /// Assembles a graph from node features and a directed edge list; edge
    /// features are derived from `coords`.
    pub fn from_parts(coords: Vec<Point<T>>, node_feats: Array2<T>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = coords.len();
        if node_feats.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} node feature rows for {n} nodes",
                node_feats.nrows()
            )));
        }
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i == j || i >= n || j >= n) {
            return Err(Error::Dimension(format!("invalid edge ({i}, {j}) for {n} nodes")));
        }
        let mut edge_feats = Array2::zeros((edges.len(), 3));
        for (e, &(i, j)) in edges.iter().enumerate() {
            let d = dist(coords[i], coords[j]);
            edge_feats[[e, 0]] = d;
            if d > T::zero() {
                edge_feats[[e, 1]] = (coords[j][0] - coords[i][0]) / d;
                edge_feats[[e, 2]] = (coords[j][1] - coords[i][1]) / d;
            }
        }
        Ok(Self {
            coords,
            node_feats,
            edges,
            edge_feats,
        })
    }

    pub fn coords(&self) -> &[Point<T>] {
        &self.coords
    }

    pub fn node_feats(&self) -> &Array2<T> {
        &self.node_feats
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_feats(&self) -> &Array2<T> {
        &self.edge_feats
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`; edges keep their order.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        if perm.len() != n {
            return Err(Error::Dimension("permutation length".into()));
        }
        let mut coords = vec![[T::zero(); 2]; n];
        let mut feats = Array2::zeros(self.node_feats.raw_dim());
        for (old, &new) in perm.iter().enumerate() {
            coords[new] = self.coords[old];
            feats.row_mut(new).assign(&self.node_feats.row(old));
        }
        let edges = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Self::from_parts(coords, feats, edges)
    }

    /// Writes `i,j,dist_nm,dir_x,dir_y`, one row per directed edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,dist_nm,dir_x,dir_y")?;
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let f = self.edge_feats.row(e);
            writeln!(w, "{i},{j},{},{},{}", f[0], f[1], f[2])?;
        }
        Ok(())
    }
}

/// Linear-interpolation percentile of unsorted values, `p` in [0, 100].
pub(crate) fn percentile<T: Real>(values: &[T], p: f64) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = T::lit(rank - lo as f64);
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// Builds the model graph of a cloud.
///
/// Triangulation edges longer than δ are dropped, then node features come from
/// the Laplacian of what remains.
pub fn build_graph<T: Real>(cloud: &PointCloud<T>, cfg: &GraphConfig) -> Result<LocGraph<T>> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let coords = cloud.positions();
    let candidates = delaunay_edges(&coords);
    let lengths: Vec<T> = candidates.iter().map(|&(i, j)| dist(coords[i], coords[j])).collect();
    let delta = match cfg.delta_mode {
        DeltaMode::Fixed(d) => T::lit(d),
        DeltaMode::Percentile(p) => percentile(&lengths, p).unwrap_or_else(T::zero),
    };
    let kept: Vec<(usize, usize)> = candidates
        .iter()
        .zip(&lengths)
        .filter(|(_, &len)| len <= delta)
        .map(|(&e, _)| e)
        .collect();
    let node_feats = laplacian_features(&kept, coords.len(), cfg.n_eigs);
    let edges = kept.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
    LocGraph::from_parts(coords, node_feats, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), Some(3.0));
        assert_eq!(percentile(&v, 25.0), Some(2.0));
        assert!((percentile(&v, 95.0).unwrap() - 4.8).abs() < 1e-12);
        assert_eq!(percentile::<f64>(&[], 50.0), None);
    }

    #[test]
    fn threshold_keeps_short_edges() {
        let cloud = PointCloud::from_positions(&[[0.0f64, 0.0], [10.0, 0.0], [1000.0, 3.0]]).unwrap();
        let cfg = GraphConfig {
            delta_mode: DeltaMode::Fixed(50.0),
            n_eigs: 5,
        };
        let g = build_graph(&cloud, &cfg).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
        assert!((g.edge_feats()[[0, 0]] - 10.0).abs() < 1e-12);
        assert_eq!(g.edge_feats()[[0, 1]], 1.0);
        assert_eq!(g.edge_feats()[[1, 1]], -1.0);
    }

    #[test]
    fn config_validation() {
        let bad = GraphConfig {
            delta_mode: DeltaMode::Percentile(100.0),
            n_eigs: 5,
        };
        assert!(bad.validate().is_err());
        let bad = GraphConfig {
            delta_mode: DeltaMode::Fixed(0.0),
            n_eigs: 5,
        };
        assert!(bad.validate().is_err());
        assert!(GraphConfig { n_eigs: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn duplicates_get_zero_direction() {
        let cloud = PointCloud::from_positions(&[[0.0, 0.0], [0.0, 0.0], [5.0, 1.0], [1.0, 6.0]]).unwrap();
        let g = build_graph(&cloud, &GraphConfig { delta_mode: DeltaMode::Fixed(100.0), n_eigs: 2 }).unwrap();
        let e = g.edges().iter().position(|&e| e == (0, 1)).unwrap();
        assert_eq!(g.edge_feats().row(e).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn edge_list_dump() {
        let cloud = PointCloud::from_positions(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let g = build_graph(&cloud, &GraphConfig::default()).unwrap();
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "i,j,dist_nm,dir_x,dir_y\n0,1,5,0.6,0.8\n1,0,5,-0.6,-0.8\n");
    }
}
