//! Evaluation of a predicted clustering against ground truth.

mod classification;
mod hull;
mod hungarian;
mod pairing;
mod partition;
mod stats;

use serde::{Deserialize, Serialize};

pub use classification::{classification_report, ClassificationReport};
pub use hull::{convex_hull, convex_intersection, hull_iou, iou_hulls, polygon_area};
pub use hungarian::{assignment_cost, hungarian};
pub use pairing::{detection_metrics, pair_clusters, DetectionMetrics, PairingResult};
pub use partition::{
    adjusted_mutual_info, adjusted_rand_index, ari_dagger, partition_metrics, Contingency, PartitionMetrics,
};
pub use stats::{cohens_d, exp_mean_fit, mean_sd};

use crate::cloud::Partition;
use crate::error::{Error, Result};
use crate::real::{Point, Real};

/// Fallback pairing threshold when the cluster width is unknown.
pub const DEFAULT_XI_NM: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// Maximum centroid distance (nm) for a predicted cluster to count as found.
    pub xi: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { xi: DEFAULT_XI_NM }
    }
}

impl MetricConfig {
    pub fn new(xi: f64) -> Result<Self> {
        let cfg = Self { xi };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(Error::InvalidConfig(format!("xi must be > 0, got {}", self.xi)));
        }
        Ok(())
    }
}

/// All scores for one field of view. Metrics that are undefined for the input
/// are `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ji_c: f64,
    pub rmsre_n: Option<f64>,
    pub rmse_xy: Option<f64>,
    pub iou: f64,
    pub ari: f64,
    pub ari_dagger: Option<f64>,
    pub ami: f64,
    pub ari_c: Option<f64>,
    pub n_clusters_gt: usize,
    pub n_clusters_pred: usize,
}

impl EvalReport {
    pub const COLUMNS: [&'static str; 10] = [
        "ji_c",
        "rmsre_n",
        "rmse_xy",
        "iou",
        "ari",
        "ari_dagger",
        "ami",
        "ari_c",
        "n_clusters_gt",
        "n_clusters_pred",
    ];

    /// Values in `COLUMNS` order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            Some(self.ji_c),
            self.rmsre_n,
            self.rmse_xy,
            Some(self.iou),
            Some(self.ari),
            self.ari_dagger,
            Some(self.ami),
            self.ari_c,
            Some(self.n_clusters_gt as f64),
            Some(self.n_clusters_pred as f64),
        ]
    }
}

/// Scores a prediction for the given points.
pub fn evaluate<T: Real>(gt: &Partition, pred: &Partition, points: &[Point<T>], cfg: &MetricConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let pairing = pair_clusters(gt, pred, points, cfg.xi)?;
    let det = detection_metrics(&pairing, gt, pred);
    let part = partition_metrics(gt, pred)?;
    Ok(EvalReport {
        ji_c: det.ji_c,
        rmsre_n: det.rmsre_n,
        rmse_xy: det.rmse_xy,
        iou: iou_hulls(&pairing, gt, pred, points),
        ari: part.ari,
        ari_dagger: part.ari_dagger,
        ami: part.ami,
        ari_c: part.ari_c,
        n_clusters_gt: gt.n_clusters(),
        n_clusters_pred: pred.n_clusters(),
    })
}

/// Column-wise mean and SD over several reports, skipping undefined entries.
pub fn summarize(reports: &[EvalReport]) -> Vec<(&'static str, Option<(f64, Option<f64>)>)> {
    EvalReport::COLUMNS
        .iter()
        .enumerate()
        .map(|(c, &name)| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.values()[c]).collect();
            (name, mean_sd(&vals))
        })
        .collect()
}
