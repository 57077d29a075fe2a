//! DBSCAN on collapsed localizations and the full inference pipeline.

mod dbscan;

use std::collections::{BTreeMap, HashMap};

use ndarray::Axis;
use serde::{Deserialize, Serialize};

pub use dbscan::{dbscan, DbscanConfig};

use crate::cloud::{centroid_of, PointCloud, Partition, BACKGROUND_CLASS, NOISE};
use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphConfig};
use crate::metrics::{detection_metrics, pair_clusters};
use crate::model::{collapse, forward, ModelParams, StepOutputs};
use crate::real::{Point, Real};

/// What the pipeline should produce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub fine: DbscanConfig,
    /// Cluster the last step's collapse as well (multiscale models only).
    pub coarse: Option<DbscanConfig>,
    /// Assign a class to every fine cluster (class-decoding models only).
    pub class_mode: bool,
    /// Step whose collapse feeds fine clustering. Defaults to `k_star - 1` for
    /// multiscale models and the last step otherwise.
    pub fine_step: Option<usize>,
}

impl PipelineConfig {
    pub fn fine_only(fine: DbscanConfig) -> Self {
        Self {
            fine,
            coarse: None,
            class_mode: false,
            fine_step: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineResult<T> {
    /// Labels of the original localizations.
    pub fine: Partition,
    pub coarse: Option<Partition>,
    /// Class of each fine cluster.
    pub cluster_class: Option<BTreeMap<i64, u32>>,
    pub collapsed_fine: Vec<Point<T>>,
    pub collapsed_coarse: Option<Vec<Point<T>>>,
    pub outputs: StepOutputs<T>,
}

impl<T: Real> PipelineResult<T> {
    /// Per-localization class: the class of its fine cluster, background for noise.
    pub fn point_classes(&self) -> Option<Vec<u32>> {
        let cc = self.cluster_class.as_ref()?;
        Some(
            self.fine
                .labels()
                .iter()
                .map(|l| cc.get(l).copied().unwrap_or(BACKGROUND_CLASS))
                .collect(),
        )
    }
}

/// Forces `fine` to refine `coarse`: points that are coarse noise become fine
/// noise and fine clusters spanning several coarse clusters are split. Applying
/// it twice changes nothing.
pub fn enforce_hierarchy(fine: &Partition, coarse: &Partition) -> Result<Partition> {
    if fine.len() != coarse.len() {
        return Err(Error::LengthMismatch {
            what: "coarse partition",
            expected: fine.len(),
            found: coarse.len(),
        });
    }
    let mut ids: HashMap<(i64, i64), i64> = HashMap::new();
    let labels = fine
        .labels()
        .iter()
        .zip(coarse.labels())
        .map(|(&f, &c)| {
            if f == NOISE || c == NOISE {
                NOISE
            } else {
                let next = ids.len() as i64;
                *ids.entry((f, c)).or_insert(next)
            }
        })
        .collect();
    Partition::new(labels)
}

/// Majority class per cluster; ties go to the lower class id.
pub fn majority_classes(part: &Partition, point_class: &[u32]) -> BTreeMap<i64, u32> {
    part.clusters()
        .into_iter()
        .map(|(id, members)| {
            let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in &members {
                *votes.entry(point_class[i]).or_default() += 1;
            }
            // ascending scan with strict > keeps the lowest class among equal counts
            let best = votes
                .iter()
                .fold((u32::MAX, 0usize), |acc, (&c, &n)| if n > acc.1 { (c, n) } else { acc })
                .0;
            (id, best)
        })
        .collect()
}

fn argmax_rows<T: Real>(logits: &ndarray::Array2<T>) -> Vec<u32> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (q, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = q;
                }
            }
            best as u32
        })
        .collect()
}

/// Graph, model, collapse and DBSCAN, with labels reported on the original
/// coordinates.
pub fn run_pipeline<T: Real>(
    cloud: &PointCloud<T>,
    params: &ModelParams<T>,
    k_star: Option<usize>,
    graph_cfg: &GraphConfig,
    cfg: &PipelineConfig,
) -> Result<PipelineResult<T>> {
    let steps = params.config.steps;
    if cfg.coarse.is_some() && k_star.is_none() {
        return Err(Error::ModeMismatch("coarse clustering needs a multiscale model".into()));
    }
    if cfg.class_mode && params.class_decoder.is_none() {
        return Err(Error::ModeMismatch("class mode needs a model with a class decoder".into()));
    }
    let fine_step = cfg.fine_step.unwrap_or(match k_star {
        Some(ks) => ks - 1,
        None => steps - 1,
    });
    if fine_step >= steps {
        return Err(Error::StepOutOfRange { step: fine_step, steps });
    }

    let graph = build_graph(cloud, graph_cfg)?;
    let outputs = forward(&graph, params)?;

    let collapsed_fine = collapse(cloud, &outputs, fine_step)?;
    let mut fine = dbscan(&collapsed_fine, &cfg.fine)?;

    let (coarse, collapsed_coarse) = match &cfg.coarse {
        Some(c) => {
            let pts = collapse(cloud, &outputs, steps - 1)?;
            let part = dbscan(&pts, c)?;
            fine = enforce_hierarchy(&fine, &part)?;
            (Some(part), Some(pts))
        }
        None => (None, None),
    };

    let cluster_class = if cfg.class_mode {
        let logits = outputs.class_logits.as_ref().expect("class decoder checked above");
        let per_point = argmax_rows(&logits[steps - 1]);
        let votes = majority_classes(&fine, &per_point);
        let demoted: Vec<i64> = fine
            .labels()
            .iter()
            .map(|l| match votes.get(l) {
                Some(&c) if c == BACKGROUND_CLASS => NOISE,
                _ => *l,
            })
            .collect();
        let kept = Partition::new(demoted)?;
        let renumbered = kept.canonical();
        let mut classes = BTreeMap::new();
        for (old, new) in kept.labels().iter().zip(renumbered.labels()) {
            if *new != NOISE {
                classes.insert(*new, votes[old]);
            }
        }
        fine = renumbered;
        Some(classes)
    } else {
        None
    };

    Ok(PipelineResult {
        fine,
        coarse,
        cluster_class,
        collapsed_fine,
        collapsed_coarse,
        outputs,
    })
}

/// For every cluster (ascending id), the distance from its centroid to the
/// nearest other centroid. Empty when there are fewer than two clusters.
pub fn nn_cluster_distances<T: Real>(part: &Partition, points: &[Point<T>]) -> Result<Vec<f64>> {
    if part.len() != points.len() {
        return Err(Error::LengthMismatch {
            what: "partition",
            expected: points.len(),
            found: part.len(),
        });
    }
    let centroids = part
        .clusters()
        .values()
        .map(|m| centroid_of(points, m).map(|c| [c[0].as_f64(), c[1].as_f64()]))
        .collect::<Result<Vec<_>>>()?;
    if centroids.len() < 2 {
        return Ok(Vec::new());
    }
    Ok(centroids
        .iter()
        .enumerate()
        .map(|(a, ca)| {
            centroids
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, cb)| (ca[0] - cb[0]).hypot(ca[1] - cb[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// One tuning case: the points DBSCAN sees, the original points the clusters
/// are scored on, and the truth.
pub struct TuneCase<'a, T> {
    pub cluster_points: &'a [Point<T>],
    pub eval_points: &'a [Point<T>],
    pub truth: &'a Partition,
}

/// Grid search for the DBSCAN parameters with the best mean JI_c. Ties keep the
/// earlier grid entry (eps outer, min_pts inner).
pub fn tune_dbscan<T: Real>(
    cases: &[TuneCase<'_, T>],
    eps_grid: &[f64],
    min_pts_grid: &[usize],
    xi: f64,
) -> Result<(DbscanConfig, f64)> {
    let mut best: Option<(DbscanConfig, f64)> = None;
    for &eps in eps_grid {
        for &min_pts in min_pts_grid {
            let cfg = DbscanConfig::new(eps, min_pts)?;
            let mut total = 0.0;
            for c in cases {
                let pred = dbscan(c.cluster_points, &cfg)?;
                let pairing = pair_clusters(c.truth, &pred, c.eval_points, xi)?;
                total += detection_metrics(&pairing, c.truth, &pred).ji_c;
            }
            let score = total / cases.len().max(1) as f64;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((cfg, score));
            }
        }
    }
    best.ok_or_else(|| Error::InvalidConfig("empty tuning grid".into()))
}
