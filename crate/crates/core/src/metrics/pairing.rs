//! Centroid pairing of ground-truth and predicted clusters, and the detection
//! scores derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use crate::cloud::Partition;
use crate::error::{Error, Result};
use crate::real::{Point, Real};

/// Outcome of matching predicted clusters to ground-truth clusters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    /// `(gt id, pred id, centroid distance)`, sorted by gt id.
    pub matches: Vec<(i64, i64, f64)>,
    /// Predicted clusters without a partner.
    pub fp: Vec<i64>,
    /// Ground-truth clusters without a partner.
    #[serde(rename = "fn")]
    pub fn_: Vec<i64>,
}

impl PairingResult {
    pub fn tp(&self) -> usize {
        self.matches.len()
    }
}

/// Cluster centroids in f64, keyed by cluster id (noise excluded).
pub(crate) fn cluster_centroids<T: Real>(part: &Partition, points: &[Point<T>]) -> BTreeMap<i64, [f64; 2]> {
    part.clusters()
        .into_iter()
        .map(|(id, members)| {
            let n = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &i| {
                (sx + points[i][0].as_f64(), sy + points[i][1].as_f64())
            });
            (id, [sx / n, sy / n])
        })
        .collect()
}

pub(crate) fn check_lengths<T>(gt: &Partition, pred: &Partition, points: &[Point<T>]) -> Result<()> {
    if gt.len() != points.len() {
        return Err(Error::LengthMismatch {
            what: "ground truth",
            expected: points.len(),
            found: gt.len(),
        });
    }
    if pred.len() != points.len() {
        return Err(Error::LengthMismatch {
            what: "prediction",
            expected: points.len(),
            found: pred.len(),
        });
    }
    Ok(())
}

/// Pairs clusters by minimum total centroid distance, admitting only pairs
/// within `xi` nm of each other.
pub fn pair_clusters<T: Real>(gt: &Partition, pred: &Partition, points: &[Point<T>], xi: f64) -> Result<PairingResult> {
    check_lengths(gt, pred, points)?;
    let gc = cluster_centroids(gt, points);
    let pc = cluster_centroids(pred, points);
    let gids: Vec<i64> = gc.keys().copied().collect();
    let pids: Vec<i64> = pc.keys().copied().collect();

    let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let dist: Vec<Vec<f64>> = gids
        .iter()
        .map(|g| pids.iter().map(|p| d(gc[g], pc[p])).collect())
        .collect();

    // a forbidden entry must cost more than any set of admissible ones
    let admissible_max = dist.iter().flatten().filter(|&&x| x <= xi).fold(0.0f64, |m, &x| m.max(x));
    let forbidden = (gids.len().max(pids.len()) + 1) as f64 * admissible_max * 2.0 + 1.0;
    let cost: Vec<Vec<f64>> = dist
        .iter()
        .map(|row| row.iter().map(|&x| if x <= xi { x } else { forbidden }).collect())
        .collect();

    let mut matches = Vec::new();
    let mut gt_used = vec![false; gids.len()];
    let mut pred_used = vec![false; pids.len()];
    for (r, c) in hungarian(&cost) {
        if dist[r][c] <= xi {
            matches.push((gids[r], pids[c], dist[r][c]));
            gt_used[r] = true;
            pred_used[c] = true;
        }
    }
    let unused = |ids: &[i64], used: &[bool]| ids.iter().zip(used).filter(|(_, &u)| !u).map(|(&i, _)| i).collect();
    Ok(PairingResult {
        fp: unused(&pids, &pred_used),
        fn_: unused(&gids, &gt_used),
        matches,
    })
}

/// Detection scores of a pairing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionMetrics {
    pub ji_c: f64,
    /// `None` when nothing was matched.
    pub rmsre_n: Option<f64>,
    /// `None` when nothing was matched.
    pub rmse_xy: Option<f64>,
}

/// Jaccard index over detected clusters, relative size error and centroid error.
pub fn detection_metrics(pairing: &PairingResult, gt: &Partition, pred: &Partition) -> DetectionMetrics {
    let tp = pairing.tp();
    let denom = tp + pairing.fp.len() + pairing.fn_.len();
    // nothing to detect and nothing detected counts as a perfect score
    let ji_c = if denom == 0 { 1.0 } else { tp as f64 / denom as f64 };
    if tp == 0 {
        return DetectionMetrics {
            ji_c,
            rmsre_n: None,
            rmse_xy: None,
        };
    }
    let gsize = gt.clusters();
    let psize = pred.clusters();
    let (mut se_n, mut se_xy) = (0.0, 0.0);
    for &(g, p, d) in &pairing.matches {
        let n = gsize[&g].len() as f64;
        let n_hat = psize[&p].len() as f64;
        se_n += ((n_hat - n) / n).powi(2);
        se_xy += d * d;
    }
    let tp = tp as f64;
    DetectionMetrics {
        ji_c,
        rmsre_n: Some((se_n / tp).sqrt()),
        rmse_xy: Some((se_xy / tp).sqrt()),
    }
}
