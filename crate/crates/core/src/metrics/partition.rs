//! Pair-counting and information-theoretic partition similarity.
//!
//! Noise is treated as one more cluster on each side, except in `ari_c`, which
//! drops the points that are noise in the ground truth.

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::cloud::{Partition, NOISE};
use crate::error::{Error, Result};

/// Similarity scores between a ground truth and a prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionMetrics {
    pub ari: f64,
    /// Harmonic mean of the unweighted averages of per-cluster adjusted Wallace indices.
    /// `None` when no cluster on one side has two or more members.
    pub ari_dagger: Option<f64>,
    pub ami: f64,
    /// ARI over the points clustered in the ground truth. `None` when there are none.
    pub ari_c: Option<f64>,
}

/// Contingency counts of two labelings.
#[derive(Clone, Debug)]
pub struct Contingency {
    /// `table[r][c]`: points in row cluster `r` and column cluster `c`.
    pub table: Vec<Vec<u64>>,
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub n: u64,
}

impl Contingency {
    pub fn new(a: &[i64], b: &[i64]) -> Self {
        let index = |labels: &[i64]| {
            let mut ids: Vec<i64> = labels.to_vec();
            ids.sort_unstable();
            ids.dedup();
            let map: HashMap<i64, usize> = ids.iter().enumerate().map(|(k, &l)| (l, k)).collect();
            (ids.len(), map)
        };
        let (nr, rmap) = index(a);
        let (nc, cmap) = index(b);
        let mut table = vec![vec![0u64; nc]; nr];
        for (x, y) in a.iter().zip(b) {
            table[rmap[x]][cmap[y]] += 1;
        }
        let rows = table.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..nc).map(|c| table.iter().map(|r| r[c]).sum()).collect();
        Self {
            table,
            rows,
            cols,
            n: a.len() as u64,
        }
    }
}

fn pairs(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

fn same_grouping(a: &[i64], b: &[i64]) -> bool {
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    a.iter().zip(b).all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *bwd.entry(y).or_insert(x) == x)
}

/// Adjusted Rand index under the permutation model. Degenerate denominators
/// yield 1 for identical groupings and 0 otherwise.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    let ct = Contingency::new(a, b);
    let index: f64 = ct.table.iter().flatten().map(|&x| pairs(x)).sum();
    let sa: f64 = ct.rows.iter().map(|&x| pairs(x)).sum();
    let sb: f64 = ct.cols.iter().map(|&x| pairs(x)).sum();
    let total = pairs(ct.n);
    let denom = 0.5 * (sa + sb) - if total > 0.0 { sa * sb / total } else { 0.0 };
    if total == 0.0 || denom == 0.0 {
        return if same_grouping(a, b) { 1.0 } else { 0.0 };
    }
    (index - sa * sb / total) / denom
}

/// Robust ARI variant: per-cluster adjusted Wallace indices are averaged
/// without the quadratic size weights, and the two directional averages are
/// combined by their harmonic mean.
pub fn ari_dagger(a: &[i64], b: &[i64]) -> Option<f64> {
    if same_grouping(a, b) {
        return Some(1.0);
    }
    let ct = Contingency::new(a, b);
    let total = pairs(ct.n);
    if total == 0.0 {
        return None;
    }
    let expect_rows: f64 = ct.rows.iter().map(|&x| pairs(x)).sum::<f64>() / total;
    let expect_cols: f64 = ct.cols.iter().map(|&x| pairs(x)).sum::<f64>() / total;

    // for a row cluster r: share of its internal pairs kept together by the columns
    let row_avg = {
        let vals: Vec<f64> = ct
            .rows
            .iter()
            .enumerate()
            .filter(|(_, &size)| size > 1)
            .map(|(r, &size)| {
                let kept: f64 = ct.table[r].iter().map(|&x| pairs(x)).sum();
                adjust(kept / pairs(size), expect_cols)
            })
            .collect::<Option<Vec<f64>>>()?;
        mean(&vals)?
    };
    let col_avg = {
        let vals: Vec<f64> = ct
            .cols
            .iter()
            .enumerate()
            .filter(|(_, &size)| size > 1)
            .map(|(c, &size)| {
                let kept: f64 = ct.table.iter().map(|r| pairs(r[c])).sum();
                adjust(kept / pairs(size), expect_rows)
            })
            .collect::<Option<Vec<f64>>>()?;
        mean(&vals)?
    };
    if row_avg + col_avg == 0.0 {
        return Some(0.0);
    }
    Some(2.0 * row_avg * col_avg / (row_avg + col_avg))
}

fn adjust(raw: f64, expected: f64) -> Option<f64> {
    if expected >= 1.0 {
        None
    } else {
        Some((raw - expected) / (1.0 - expected))
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Expected mutual information of two random labelings with the given
/// marginals (hypergeometric permutation model).
fn expected_mutual_info(rows: &[u64], cols: &[u64], n: u64) -> f64 {
    let nf = n as f64;
    let lg_n = ln_gamma(nf + 1.0);
    let mut emi = 0.0;
    for &a in rows {
        for &b in cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            if lo > hi {
                continue;
            }
            let (af, bf) = (a as f64, b as f64);
            let fixed = ln_gamma(af + 1.0) + ln_gamma(bf + 1.0) + ln_gamma(nf - af + 1.0) + ln_gamma(nf - bf + 1.0)
                - lg_n;
            for nij in lo..=hi {
                let x = nij as f64;
                let term = x / nf * (nf * x / (af * bf)).ln();
                let lp = fixed
                    - ln_gamma(x + 1.0)
                    - ln_gamma(af - x + 1.0)
                    - ln_gamma(bf - x + 1.0)
                    - ln_gamma(nf - af - bf + x + 1.0);
                emi += term * lp.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with arithmetic-mean normalization.
pub fn adjusted_mutual_info(a: &[i64], b: &[i64]) -> f64 {
    if same_grouping(a, b) {
        return 1.0;
    }
    let ct = Contingency::new(a, b);
    let n = ct.n as f64;
    let mut mi = 0.0;
    for (r, row) in ct.table.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            if x > 0 {
                let x = x as f64;
                mi += x / n * (n * x / (ct.rows[r] as f64 * ct.cols[c] as f64)).ln();
            }
        }
    }
    let emi = expected_mutual_info(&ct.rows, &ct.cols, ct.n);
    let norm = 0.5 * (entropy(&ct.rows, n) + entropy(&ct.cols, n));
    let denom = norm - emi;
    if denom.abs() < f64::EPSILON {
        return 0.0;
    }
    ((mi - emi) / denom).min(1.0)
}

/// All partition similarity scores for a (ground truth, prediction) pair.
pub fn partition_metrics(gt: &Partition, pred: &Partition) -> Result<PartitionMetrics> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "prediction",
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let (g, p) = (gt.labels(), pred.labels());
    let clustered: Vec<usize> = (0..g.len()).filter(|&i| g[i] != NOISE).collect();
    let ari_c = if clustered.is_empty() {
        None
    } else {
        let gc: Vec<i64> = clustered.iter().map(|&i| g[i]).collect();
        let pc: Vec<i64> = clustered.iter().map(|&i| p[i]).collect();
        Some(adjusted_rand_index(&gc, &pc))
    };
    Ok(PartitionMetrics {
        ari: adjusted_rand_index(g, p),
        ari_dagger: ari_dagger(g, p),
        ami: adjusted_mutual_info(g, p),
        ari_c,
    })
}
