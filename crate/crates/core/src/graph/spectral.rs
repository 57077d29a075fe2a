//! Normalized-Laplacian positional features.
//!
//! `Δ = I − D^{-1/2} A D^{-1/2}`; an isolated node keeps its identity row, so it
//! contributes the eigenvalue 1. The matrix is block-diagonal over connected
//! components and is solved one block at a time.

use std::collections::BTreeSet;

use ndarray::Array2;

use super::eigen::{lanczos_smallest, symmetric_eigen, SymOp};
use crate::real::Real;

/// Components up to this size are solved densely.
pub const DENSE_LIMIT: usize = 2048;

/// Relative tolerance separating the null space from genuine small eigenvalues.
pub const ZERO_TOL: f64 = 1e-9;

const LANCZOS_RESIDUAL: f64 = 1e-8;

/// Adjacency lists from an edge list; direction, duplicates and self-loops are ignored.
pub fn adjacency(edges: &[(usize, usize)], n: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        if i != j {
            sets[i].insert(j);
            sets[j].insert(i);
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Connected components, each sorted, ordered by smallest member.
pub fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut head = 0;
        while head < comp.len() {
            let u = comp[head];
            head += 1;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Eigenpairs of one component, vectors stored row-major `len x count` over the
/// component's local indices.
struct Block<T> {
    nodes: Vec<usize>,
    values: Vec<T>,
    vectors: Vec<T>,
}

impl<T: Real> Block<T> {
    fn count(&self) -> usize {
        self.values.len()
    }

    fn entry(&self, local: usize, k: usize) -> T {
        self.vectors[local * self.count() + k]
    }
}

struct LocalLaplacian<T> {
    nbrs: Vec<Vec<usize>>,
    inv_sqrt_deg: Vec<T>,
}

impl<T: Real> LocalLaplacian<T> {
    fn new(nodes: &[usize], adj: &[Vec<usize>]) -> Self {
        let local_of = |g: usize| nodes.binary_search(&g).expect("neighbor inside component");
        let nbrs: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&g| adj[g].iter().map(|&h| local_of(h)).collect())
            .collect();
        let inv_sqrt_deg = nbrs
            .iter()
            .map(|nb| {
                if nb.is_empty() {
                    T::zero()
                } else {
                    T::one() / T::from_usize_lossy(nb.len()).sqrt()
                }
            })
            .collect();
        Self { nbrs, inv_sqrt_deg }
    }

    fn dense(&self) -> Vec<T> {
        let n = self.nbrs.len();
        let mut m = vec![T::zero(); n * n];
        for i in 0..n {
            m[i * n + i] = T::one();
            for &j in &self.nbrs[i] {
                m[i * n + j] = m[i * n + j] - self.inv_sqrt_deg[i] * self.inv_sqrt_deg[j];
            }
        }
        m
    }
}

impl<T: Real> SymOp<T> for LocalLaplacian<T> {
    fn dim(&self) -> usize {
        self.nbrs.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, nb) in self.nbrs.iter().enumerate() {
            let mut acc = T::zero();
            for &j in nb {
                acc = acc + self.inv_sqrt_deg[j] * x[j];
            }
            y[i] = x[i] - self.inv_sqrt_deg[i] * acc;
        }
    }
}

/// Solves every component. `want` bounds how many of the smallest eigenpairs a
/// component must report; `None` asks for the full spectrum (dense only).
fn solve_blocks<T: Real>(adj: &[Vec<usize>], want: Option<usize>) -> Vec<Block<T>> {
    components(adj)
        .into_iter()
        .map(|nodes| {
            let lap = LocalLaplacian::new(&nodes, adj);
            let s = nodes.len();
            if s == 1 {
                // an isolated node has L_uu = 0, so it adds one zero eigenvalue per component
                return Block {
                    nodes,
                    values: vec![T::zero()],
                    vectors: vec![T::one()],
                };
            }
            match want {
                Some(k) if s > DENSE_LIMIT => {
                    let (values, vectors) = lanczos_smallest(&lap, k + 1, T::lit(LANCZOS_RESIDUAL));
                    Block { nodes, values, vectors }
                }
                _ => {
                    let (values, vectors) = symmetric_eigen(&lap.dense(), s);
                    Block { nodes, values, vectors }
                }
            }
        })
        .collect()
}

/// Full spectrum of the normalized Laplacian with eigenvectors as columns of an
/// `n x n` matrix, sorted by eigenvalue.
#[derive(Clone, Debug)]
pub struct Spectrum<T> {
    pub values: Vec<T>,
    pub vectors: Array2<T>,
}

/// Complete eigen-decomposition. Intended for graphs small enough to solve densely.
pub fn laplacian_spectrum<T: Real>(edges: &[(usize, usize)], n: usize) -> Spectrum<T> {
    let adj = adjacency(edges, n);
    let blocks = solve_blocks::<T>(&adj, None);
    let mut order: Vec<(usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, blk)| (0..blk.count()).map(move |k| (b, k)))
        .collect();
    order.sort_by(|&(b1, k1), &(b2, k2)| {
        blocks[b1].values[k1]
            .partial_cmp(&blocks[b2].values[k2])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((b1, k1).cmp(&(b2, k2)))
    });
    let mut vectors = Array2::zeros((n, order.len()));
    let mut values = Vec::with_capacity(order.len());
    for (col, &(b, k)) in order.iter().enumerate() {
        let blk = &blocks[b];
        values.push(blk.values[k]);
        for (local, &g) in blk.nodes.iter().enumerate() {
            vectors[[g, col]] = blk.entry(local, k);
        }
    }
    Spectrum { values, vectors }
}

/// Per-node features: absolute entries of the `n_eigs` eigenvectors with the
/// smallest eigenvalues above the zero tolerance. Missing columns stay zero.
pub fn laplacian_features<T: Real>(edges: &[(usize, usize)], n: usize, n_eigs: usize) -> Array2<T> {
    let mut feats = Array2::zeros((n, n_eigs));
    if n == 0 || n_eigs == 0 {
        return feats;
    }
    let adj = adjacency(edges, n);
    let blocks = solve_blocks::<T>(&adj, Some(n_eigs));

    let largest = blocks
        .iter()
        .flat_map(|b| b.values.iter().copied())
        .fold(T::zero(), T::max);
    let tol = T::lit(ZERO_TOL) * largest.max(T::one());

    let mut candidates: Vec<(T, usize, usize)> = Vec::new();
    for (b, blk) in blocks.iter().enumerate() {
        candidates.extend(
            blk.values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > tol)
                .take(n_eigs)
                .map(|(k, &v)| (v, b, k)),
        );
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    for (col, &(_, b, k)) in candidates.iter().take(n_eigs).enumerate() {
        let blk = &blocks[b];
        for (local, &g) in blk.nodes.iter().enumerate() {
            feats[[g, col]] = blk.entry(local, k).abs();
        }
    }
    feats
}
