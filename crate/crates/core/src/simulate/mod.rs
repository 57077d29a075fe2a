//! Synthetic labeled clouds: benchmark scenarios, blinking, augmentation and
//! the two-cluster resolution test.

mod augment;
mod presets;
mod shapes;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

pub use augment::{augment_dataset, background_pool, extract_seed_clusters, AugmentSpec, BackgroundMode, SeedCluster};
pub use presets::{preset, PRESET_NAMES};
pub use shapes::Shape;

use crate::cloud::{Partition, BACKGROUND_CLASS, NOISE};
use crate::{Extent, LabeledCloud, Localization, PointCloud};
use crate::error::{Error, Result};
use shapes::{normal, sample_blob, Corner};

/// Independent seed for item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Integer distribution for cluster and molecule counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountDist {
    Fixed(usize),
    /// Inclusive range.
    Uniform { min: usize, max: usize },
    /// Geometric on `1, 2, ...` with the given mean.
    Geometric { mean: f64 },
}

impl CountDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CountDist::Uniform { min, max } if min > max => {
                Err(Error::InvalidConfig(format!("count range {min}..{max} is empty")))
            }
            CountDist::Geometric { mean } if !(mean >= 1.0 && mean.is_finite()) => {
                Err(Error::InvalidConfig(format!("geometric mean must be >= 1, got {mean}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        match *self {
            CountDist::Fixed(n) => n,
            CountDist::Uniform { min, max } => rng.random_range(min..=max),
            CountDist::Geometric { mean } => 1 + shifted_geometric(1.0 / mean, rng),
        }
    }
}

/// Number of failures before the first success.
fn shifted_geometric<R: Rng>(p: f64, rng: &mut R) -> usize {
    if p >= 1.0 {
        return 0;
    }
    Geometric::new(p).expect("p in (0, 1)").sample(rng) as usize
}

fn default_class() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterGroup {
    /// Clusters of this kind per cloud.
    pub count: CountDist,
    /// Molecules per cluster (per corner for `npc`).
    pub molecules: CountDist,
    pub shape: Shape,
    /// Class of the group's molecules; 0 is reserved for background.
    #[serde(default = "default_class")]
    pub class_id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    /// Share of all molecules that are background.
    FractionOfTotal(f64),
    Count(usize),
}

fn default_attempts() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Field size `[width, height]` in nm, origin at (0, 0).
    pub extent: [f64; 2],
    pub cluster_groups: Vec<ClusterGroup>,
    pub background: Background,
    /// Minimum distance between cluster centers in nm (0: unconstrained).
    #[serde(default)]
    pub min_cluster_separation: f64,
    /// Placement attempts per cluster before giving up.
    #[serde(default = "default_attempts")]
    pub placement_attempts: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.extent.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("extent must be positive, got {:?}", self.extent)));
        }
        for g in &self.cluster_groups {
            g.count.validate()?;
            g.molecules.validate()?;
            g.shape.validate()?;
            if g.class_id == BACKGROUND_CLASS {
                return Err(Error::InvalidConfig("class_id 0 is reserved for background".into()));
            }
        }
        if let Background::FractionOfTotal(f) = self.background {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!("background fraction must be in [0, 1), got {f}")));
            }
        }
        if !(self.min_cluster_separation >= 0.0) {
            return Err(Error::InvalidConfig("min_cluster_separation must be >= 0".into()));
        }
        if self.placement_attempts == 0 {
            return Err(Error::InvalidConfig("placement_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlinkSpec {
    /// Mean localizations per molecule.
    pub mean_blinks: f64,
    /// Standard deviation of each localization around its molecule, nm.
    pub localization_precision: f64,
    /// Blink background molecules too.
    #[serde(default = "yes")]
    pub include_background: bool,
}

fn yes() -> bool {
    true
}

impl BlinkSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_blinks >= 1.0 && self.mean_blinks.is_finite()) {
            return Err(Error::InvalidConfig(format!("mean_blinks must be >= 1, got {}", self.mean_blinks)));
        }
        if !(self.localization_precision >= 0.0 && self.localization_precision.is_finite()) {
            return Err(Error::InvalidConfig("localization_precision must be >= 0".into()));
        }
        Ok(())
    }
}

/// A scenario with optional blinking, as stored in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blinking: Option<BlinkSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if let Some(b) = &self.blinking {
            b.validate()?;
        }
        Ok(())
    }

    /// Generates one cloud, blinking included.
    pub fn sample(&self, seed: u64) -> Result<LabeledCloud> {
        let base = generate(&self.spec, seed)?;
        match &self.blinking {
            Some(b) => apply_blinking(&base, b, derive_seed(seed, u64::MAX)),
            None => Ok(base),
        }
    }
}

struct Builder {
    points: Vec<[f64; 2]>,
    fine: Vec<i64>,
    coarse: Vec<i64>,
    class: Vec<u32>,
    next_fine: i64,
    next_coarse: i64,
}

impl Builder {
    fn push_cluster(&mut self, pts: Vec<[f64; 2]>, coarse: i64, class: u32) {
        if pts.is_empty() {
            return;
        }
        let id = self.next_fine;
        self.next_fine += 1;
        for p in pts {
            self.points.push(p);
            self.fine.push(id);
            self.coarse.push(coarse);
            self.class.push(class);
        }
    }

    fn finish(self, extent: Extent, with_coarse: bool) -> Result<LabeledCloud> {
        let locs = self.points.iter().map(|p| Localization::new(p[0], p[1])).collect();
        let cloud = PointCloud::with_extent(locs, extent)?;
        let mut out = LabeledCloud::new(cloud, Partition::new(self.fine)?)?.with_shape_class(self.class)?;
        if with_coarse {
            out = out.with_coarse_truth(Partition::new(self.coarse)?)?;
        }
        Ok(out)
    }
}

fn place_center<R: Rng>(
    rng: &mut R,
    extent: [f64; 2],
    taken: &[[f64; 2]],
    min_sep: f64,
    attempts: usize,
) -> Result<[f64; 2]> {
    for _ in 0..attempts {
        let c = [rng.random_range(0.0..extent[0]), rng.random_range(0.0..extent[1])];
        if min_sep <= 0.0 || taken.iter().all(|t| (t[0] - c[0]).hypot(t[1] - c[1]) >= min_sep) {
            return Ok(c);
        }
    }
    Err(Error::Placement)
}

/// Draws one labeled cloud from a scenario. Clusters are emitted first, group
/// by group, followed by the background.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<LabeledCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        points: Vec::new(),
        fine: Vec::new(),
        coarse: Vec::new(),
        class: Vec::new(),
        next_fine: 0,
        next_coarse: 0,
    };
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let mut has_npc = false;

    for g in &spec.cluster_groups {
        let count = g.count.sample(&mut rng);
        for _ in 0..count {
            let c = place_center(
                &mut rng,
                spec.extent,
                &centers,
                spec.min_cluster_separation,
                spec.placement_attempts,
            )?;
            centers.push(c);
            let coarse = b.next_coarse;
            b.next_coarse += 1;
            match g.shape {
                Shape::Npc {
                    corner_radius,
                    corners,
                    spread_divisor,
                } => {
                    has_npc = true;
                    let rot = rng.random_range(0.0..2.0 * PI);
                    for k in 0..corners {
                        let corner = Corner::new(c, rot + 2.0 * PI * k as f64 / corners as f64, corner_radius, corners);
                        let n = g.molecules.sample(&mut rng);
                        b.push_cluster(corner.sample(n, spread_divisor, &mut rng), coarse, g.class_id);
                    }
                }
                ref shape => {
                    let n = g.molecules.sample(&mut rng);
                    b.push_cluster(sample_blob(shape, c, n, &mut rng), coarse, g.class_id);
                }
            }
        }
    }

    let clustered = b.points.len();
    let n_bg = match spec.background {
        Background::Count(n) => n,
        Background::FractionOfTotal(f) => (f * clustered as f64 / (1.0 - f)).round() as usize,
    };
    for _ in 0..n_bg {
        b.points.push([rng.random_range(0.0..spec.extent[0]), rng.random_range(0.0..spec.extent[1])]);
        b.fine.push(NOISE);
        b.coarse.push(NOISE);
        b.class.push(BACKGROUND_CLASS);
    }
    b.finish(Extent::sized(spec.extent[0], spec.extent[1]), has_npc)
}

/// Replaces every molecule by `1 + Geometric` localizations scattered with the
/// localization precision. Labels are inherited.
pub fn apply_blinking(cloud: &LabeledCloud, spec: &BlinkSpec, seed: u64) -> Result<LabeledCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 1.0 / spec.mean_blinks;
    let s = spec.localization_precision;
    let truth = cloud.truth();
    let mut locs = Vec::new();
    let mut fine = Vec::new();
    let mut coarse = Vec::new();
    let mut class = Vec::new();
    for (i, loc) in cloud.cloud().points().iter().enumerate() {
        let label = truth.map_or(NOISE, |t| t.labels()[i]);
        let m = if label == NOISE && !spec.include_background {
            1
        } else {
            1 + shifted_geometric(p, &mut rng)
        };
        for _ in 0..m {
            let (dx, dy) = if s > 0.0 {
                (s * normal(&mut rng), s * normal(&mut rng))
            } else {
                (0.0, 0.0)
            };
            locs.push(Localization {
                x: loc.x + dx,
                y: loc.y + dy,
                frame: loc.frame,
            });
            fine.push(label);
            coarse.push(cloud.coarse_truth().map_or(NOISE, |c| c.labels()[i]));
            class.push(cloud.shape_class().map_or(BACKGROUND_CLASS, |c| c[i]));
        }
    }
    let pc = PointCloud::with_extent(locs, cloud.cloud().extent())?;
    LabeledCloud::from_parts(
        pc,
        truth.map(|_| Partition::new(fine)).transpose()?,
        cloud.shape_class().map(|_| class),
        cloud.coarse_truth().map(|_| Partition::new(coarse)).transpose()?,
    )
}

/// Two normal spots of width `sigma` whose centers are `separation` nm apart
/// along x, with geometric localization counts of mean `mean_count`. Labels 0
/// and 1; no background.
pub fn gen_pair_test(sigma: f64, separation: f64, mean_count: f64, seed: u64) -> Result<LabeledCloud> {
    if !(sigma > 0.0) || !(separation >= 0.0) {
        return Err(Error::InvalidConfig("pair test needs sigma > 0 and separation >= 0".into()));
    }
    let counts = CountDist::Geometric { mean: mean_count };
    counts.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::Gaussian { sigma, sigma_max: None };
    let mut locs = Vec::new();
    let mut labels = Vec::new();
    for (id, cx) in [(0i64, -separation / 2.0), (1, separation / 2.0)] {
        let n = counts.sample(&mut rng);
        for p in sample_blob(&shape, [cx, 0.0], n, &mut rng) {
            locs.push(Localization::new(p[0], p[1]));
            labels.push(id);
        }
    }
    let half = separation / 2.0 + 6.0 * sigma;
    let extent = Extent::new([-half, -6.0 * sigma], [half, 6.0 * sigma]);
    let n = labels.len();
    LabeledCloud::new(PointCloud::with_extent(locs, extent)?, Partition::new(labels)?)?.with_shape_class(vec![1; n])
}
