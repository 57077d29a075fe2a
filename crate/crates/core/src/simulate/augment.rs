//! Training sets built from a handful of example clusters.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shapes::normal;
use super::{derive_seed, CountDist};
use crate::cluster::majority_classes;
use crate::cloud::{Partition, BACKGROUND_CLASS, NOISE};
use crate::error::{Error, Result};
use crate::{Extent, LabeledCloud, Localization, PointCloud};

/// One example cluster, stored relative to its centroid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedCluster {
    pub points: Vec<[f64; 2]>,
    #[serde(default = "one")]
    pub class_id: u32,
}

fn one() -> u32 {
    1
}

impl SeedCluster {
    /// Centers `points` on their centroid.
    pub fn new(points: Vec<[f64; 2]>, class_id: u32) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let n = points.len() as f64;
        let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
        Ok(Self {
            points: points.iter().map(|p| [p[0] - cx, p[1] - cy]).collect(),
            class_id,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundMode {
    Uniform,
    /// Background taken from a source pool under a random periodic shift, so
    /// that its local structure is kept.
    Resampled { pool: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    pub rotations: bool,
    pub reflections: bool,
    pub dropout_prob: f64,
    /// Chance that a localization gets a jittered duplicate.
    pub addition_prob: f64,
    /// Normal displacement applied to every localization, nm.
    pub jitter_sigma: f64,
    pub placements_per_cloud: CountDist,
    /// Share of all localizations that are background.
    pub background_fraction: f64,
    pub background_mode: BackgroundMode,
    /// Smallest distance between placed cluster centers, nm. 0 allows overlap.
    pub min_separation: f64,
    pub placement_attempts: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotations: true,
            reflections: true,
            dropout_prob: 0.1,
            addition_prob: 0.1,
            jitter_sigma: 5.0,
            placements_per_cloud: CountDist::Uniform { min: 2, max: 6 },
            background_fraction: 0.1,
            background_mode: BackgroundMode::Uniform,
            min_separation: 0.0,
            placement_attempts: 10_000,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("dropout_prob", self.dropout_prob),
            ("addition_prob", self.addition_prob),
            ("background_fraction", self.background_fraction),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1), got {p}")));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidConfig("jitter_sigma must be >= 0".into()));
        }
        if !(self.min_separation >= 0.0 && self.min_separation.is_finite()) {
            return Err(Error::InvalidConfig("min_separation must be >= 0".into()));
        }
        if self.placement_attempts == 0 {
            return Err(Error::InvalidConfig("placement_attempts must be >= 1".into()));
        }
        self.placements_per_cloud.validate()?;
        if let BackgroundMode::Resampled { pool } = &self.background_mode {
            if pool.is_empty() && self.background_fraction > 0.0 {
                return Err(Error::InvalidConfig("resampled background needs a non-empty pool".into()));
            }
        }
        Ok(())
    }
}

/// Every truth cluster of `labeled` as a seed, in ascending id order. Classes
/// come from `shape_class` by majority, defaulting to 1.
pub fn extract_seed_clusters(labeled: &LabeledCloud) -> Result<Vec<SeedCluster>> {
    let truth = labeled.truth().ok_or(Error::MissingTruth("seed extraction"))?;
    let pts = labeled.cloud().positions();
    truth
        .clusters()
        .into_values()
        .map(|members| {
            let class = match labeled.shape_class() {
                Some(c) => {
                    let part = Partition::new(vec![0; members.len()])?;
                    let votes: Vec<u32> = members.iter().map(|&i| c[i]).collect();
                    majority_classes(&part, &votes)[&0]
                }
                None => 1,
            };
            SeedCluster::new(members.iter().map(|&i| pts[i]).collect(), class.max(1))
        })
        .collect()
}

/// Background localizations of `labeled`, usable as a resampling pool.
pub fn background_pool(labeled: &LabeledCloud) -> Vec<[f64; 2]> {
    let pts = labeled.cloud().positions();
    match labeled.truth() {
        Some(t) => (0..pts.len()).filter(|&i| t.is_noise(i)).map(|i| pts[i]).collect(),
        None => Vec::new(),
    }
}

fn augment_copy<R: Rng>(seed: &SeedCluster, spec: &AugmentSpec, rng: &mut R) -> Vec<[f64; 2]> {
    let theta = if spec.rotations { rng.random_range(0.0..2.0 * PI) } else { 0.0 };
    let flip = spec.reflections && rng.random_bool(0.5);
    let (sn, cs) = theta.sin_cos();
    let j = spec.jitter_sigma;
    let jitter = |rng: &mut R, p: [f64; 2]| {
        if j > 0.0 {
            [p[0] + j * normal(rng), p[1] + j * normal(rng)]
        } else {
            p
        }
    };
    let mut out = Vec::with_capacity(seed.points.len());
    for &[x, y] in &seed.points {
        let y = if flip { -y } else { y };
        let p = [cs * x - sn * y, sn * x + cs * y];
        if spec.dropout_prob > 0.0 && rng.random_bool(spec.dropout_prob) {
            continue;
        }
        let q = jitter(rng, p);
        out.push(q);
        if spec.addition_prob > 0.0 && rng.random_bool(spec.addition_prob) {
            // the duplicate gets its own jitter on top of the original's
            let d = jitter(rng, q);
            out.push(d);
        }
    }
    out
}

fn augment_one(seeds: &[SeedCluster], spec: &AugmentSpec, extent: [f64; 2], seed: u64) -> Result<LabeledCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let mut labels = Vec::new();
    let mut class = Vec::new();
    let placements = spec.placements_per_cloud.sample(&mut rng);
    let mut next = 0i64;
    let mut centers: Vec<[f64; 2]> = Vec::new();
    for _ in 0..placements {
        let s = &seeds[rng.random_range(0..seeds.len())];
        let copy = augment_copy(s, spec, &mut rng);
        let mut at = [rng.random_range(0.0..extent[0]), rng.random_range(0.0..extent[1])];
        if spec.min_separation > 0.0 {
            let clear = |a: &[f64; 2]| centers.iter().all(|c| (c[0] - a[0]).hypot(c[1] - a[1]) >= spec.min_separation);
            let mut tries = 1;
            while !clear(&at) {
                if tries == spec.placement_attempts {
                    return Err(Error::Placement);
                }
                at = [rng.random_range(0.0..extent[0]), rng.random_range(0.0..extent[1])];
                tries += 1;
            }
            centers.push(at);
        }
        if copy.is_empty() {
            continue;
        }
        for p in copy {
            pts.push([p[0] + at[0], p[1] + at[1]]);
            labels.push(next);
            class.push(s.class_id);
        }
        next += 1;
    }
    let f = spec.background_fraction;
    let n_bg = (f * pts.len() as f64 / (1.0 - f)).round() as usize;
    match &spec.background_mode {
        BackgroundMode::Uniform => {
            for _ in 0..n_bg {
                pts.push([rng.random_range(0.0..extent[0]), rng.random_range(0.0..extent[1])]);
            }
        }
        BackgroundMode::Resampled { pool } => {
            let shift = [rng.random_range(0.0..extent[0]), rng.random_range(0.0..extent[1])];
            for _ in 0..n_bg {
                let p = pool[rng.random_range(0..pool.len())];
                pts.push([(p[0] + shift[0]).rem_euclid(extent[0]), (p[1] + shift[1]).rem_euclid(extent[1])]);
            }
        }
    }
    labels.resize(pts.len(), NOISE);
    class.resize(pts.len(), BACKGROUND_CLASS);
    let locs = pts.iter().map(|p| Localization::new(p[0], p[1])).collect();
    let cloud = PointCloud::with_extent(locs, Extent::sized(extent[0], extent[1]))?;
    LabeledCloud::new(cloud, Partition::new(labels)?)?.with_shape_class(class)
}

/// `n_clouds` clouds of augmented seed copies over a field of size `extent`.
/// Cloud `i` only depends on `derive_seed(seed, i)`.
pub fn augment_dataset(
    seeds: &[SeedCluster],
    spec: &AugmentSpec,
    n_clouds: usize,
    extent: [f64; 2],
    seed: u64,
) -> Result<Vec<LabeledCloud>> {
    if seeds.is_empty() || seeds.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidConfig("augmentation needs at least one non-empty seed cluster".into()));
    }
    spec.validate()?;
    if !extent.iter().all(|&v| v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidConfig(format!("extent must be positive, got {extent:?}")));
    }
    (0..n_clouds)
        .into_par_iter()
        .map(|i| augment_one(seeds, spec, extent, derive_seed(seed, i as u64)))
        .collect()
}
