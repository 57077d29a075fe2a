//! Localizations, point clouds and cluster assignments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::real::{Point, Real};

/// Label reserved for non-clustered localizations.
pub const NOISE: i64 = -1;

/// Class id reserved for background localizations.
pub const BACKGROUND_CLASS: u32 = 0;

/// One detected molecular position, in nanometers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Localization<T> {
    pub x: T,
    pub y: T,
    /// Acquisition frame. Carried through I/O, never used by the model.
    pub frame: Option<u64>,
}

impl<T: Real> Localization<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y, frame: None }
    }

    pub fn with_frame(x: T, y: T, frame: u64) -> Self {
        Self {
            x,
            y,
            frame: Some(frame),
        }
    }

    #[inline]
    pub fn pos(&self) -> Point<T> {
        [self.x, self.y]
    }
}

/// Axis-aligned rectangle, in nanometers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent<T> {
    pub min: Point<T>,
    pub max: Point<T>,
}

impl<T: Real> Extent<T> {
    pub fn new(min: Point<T>, max: Point<T>) -> Self {
        Self { min, max }
    }

    /// `[0, width] x [0, height]`.
    pub fn sized(width: T, height: T) -> Self {
        Self {
            min: [T::zero(), T::zero()],
            max: [width, height],
        }
    }

    pub fn width(&self) -> T {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> T {
        self.max[1] - self.min[1]
    }

    pub fn diagonal(&self) -> T {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point<T> {
        let half = T::lit(0.5);
        [
            (self.min[0] + self.max[0]) * half,
            (self.min[1] + self.max[1]) * half,
        ]
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    fn grow(&mut self, p: Point<T>) {
        self.min[0] = self.min[0].min(p[0]);
        self.min[1] = self.min[1].min(p[1]);
        self.max[0] = self.max[0].max(p[0]);
        self.max[1] = self.max[1].max(p[1]);
    }
}

/// An ordered set of localizations with a bounding extent that contains all of them.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<Localization<T>>,
    extent: Extent<T>,
}

impl<T: Real> PointCloud<T> {
    /// Builds a cloud whose extent is the bounding box of its points.
    pub fn new(points: Vec<Localization<T>>) -> Result<Self> {
        let origin = Extent::new([T::zero(); 2], [T::zero(); 2]);
        let extent = points.first().map_or(origin, |p| Extent::new(p.pos(), p.pos()));
        Self::with_extent(points, extent)
    }

    /// Builds a cloud with a nominal field of view, grown to fit any point outside it.
    pub fn with_extent(points: Vec<Localization<T>>, mut extent: Extent<T>) -> Result<Self> {
        for (index, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::NonFinite { index });
            }
            extent.grow(p.pos());
        }
        Ok(Self { points, extent })
    }

    pub fn from_positions(positions: &[Point<T>]) -> Result<Self> {
        Self::new(positions.iter().map(|p| Localization::new(p[0], p[1])).collect())
    }

    pub fn points(&self) -> &[Localization<T>] {
        &self.points
    }

    pub fn extent(&self) -> Extent<T> {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point<T>> {
        self.points.iter().map(Localization::pos).collect()
    }

    /// Copy of the cloud shifted by `(dx, dy)`; the extent moves with it.
    pub fn translated(&self, dx: T, dy: T) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| Localization {
                x: p.x + dx,
                y: p.y + dy,
                frame: p.frame,
            })
            .collect();
        let extent = Extent::new(
            [self.extent.min[0] + dx, self.extent.min[1] + dy],
            [self.extent.max[0] + dx, self.extent.max[1] + dy],
        );
        Self { points, extent }
    }
}

/// Per-localization cluster assignment. `NOISE` marks non-clustered points.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<i64>,
}

impl Partition {
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l < NOISE) {
            return Err(Error::InvalidLabel { index, label });
        }
        Ok(Self { labels })
    }

    /// Validates the label count against the number of annotated points.
    pub fn for_points(labels: Vec<i64>, n_points: usize) -> Result<Self> {
        if labels.len() != n_points {
            return Err(Error::LengthMismatch {
                what: "partition",
                expected: n_points,
                found: labels.len(),
            });
        }
        Self::new(labels)
    }

    pub fn all_noise(n: usize) -> Self {
        Self {
            labels: vec![NOISE; n],
        }
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_noise(&self, i: usize) -> bool {
        self.labels[i] == NOISE
    }

    /// Point indices of every non-noise cluster, keyed by cluster id.
    pub fn clusters(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut out: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NOISE {
                out.entry(l).or_default().push(i);
            }
        }
        out
    }

    pub fn cluster_ids(&self) -> Vec<i64> {
        self.clusters().into_keys().collect()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters().len()
    }

    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Renumbers clusters `0..n` in order of first appearance; noise stays noise.
    pub fn canonical(&self) -> Self {
        let mut map = BTreeMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if l == NOISE {
                    NOISE
                } else {
                    let next = map.len() as i64;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        Self { labels }
    }

    /// True when both partitions induce the same grouping and the same noise set.
    pub fn equivalent(&self, other: &Partition) -> bool {
        self.canonical() == other.canonical()
    }

    /// Restriction to the given point indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// True when every cluster of `self` lies inside a single non-noise cluster of `coarse`.
    pub fn refines(&self, coarse: &Partition) -> bool {
        self.len() == coarse.len()
            && self.clusters().values().all(|members| {
                let first = coarse.labels[members[0]];
                first != NOISE && members.iter().all(|&i| coarse.labels[i] == first)
            })
    }
}

/// A cloud with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCloud<T> {
    cloud: PointCloud<T>,
    truth: Option<Partition>,
    shape_class: Option<Vec<u32>>,
    coarse_truth: Option<Partition>,
}

impl<T: Real> LabeledCloud<T> {
    pub fn new(cloud: PointCloud<T>, truth: Partition) -> Result<Self> {
        check_len("truth", cloud.len(), truth.len())?;
        Ok(Self {
            cloud,
            truth: Some(truth),
            shape_class: None,
            coarse_truth: None,
        })
    }

    /// A cloud with no annotation columns at all.
    pub fn unlabeled(cloud: PointCloud<T>) -> Self {
        Self {
            cloud,
            truth: None,
            shape_class: None,
            coarse_truth: None,
        }
    }

    /// Attaches per-point class ids. Noise points must carry the background class.
    pub fn with_shape_class(mut self, classes: Vec<u32>) -> Result<Self> {
        check_len("shape_class", self.cloud.len(), classes.len())?;
        if let Some(truth) = &self.truth {
            if let Some(i) = (0..classes.len())
                .find(|&i| truth.is_noise(i) && classes[i] != BACKGROUND_CLASS)
            {
                return Err(Error::InvalidLabels(format!(
                    "point {i} is noise but has class {}",
                    classes[i]
                )));
            }
        }
        self.shape_class = Some(classes);
        Ok(self)
    }

    /// Attaches the coarse-scale partition; the fine truth must refine it.
    pub fn with_coarse_truth(mut self, coarse: Partition) -> Result<Self> {
        check_len("coarse_truth", self.cloud.len(), coarse.len())?;
        if let Some(truth) = &self.truth {
            if !truth.refines(&coarse) {
                return Err(Error::InvalidLabels(
                    "fine truth does not refine the coarse truth".into(),
                ));
            }
        }
        self.coarse_truth = Some(coarse);
        Ok(self)
    }

    pub fn cloud(&self) -> &PointCloud<T> {
        &self.cloud
    }

    pub fn truth(&self) -> Option<&Partition> {
        self.truth.as_ref()
    }

    pub fn shape_class(&self) -> Option<&[u32]> {
        self.shape_class.as_deref()
    }

    pub fn coarse_truth(&self) -> Option<&Partition> {
        self.coarse_truth.as_ref()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn into_parts(self) -> (PointCloud<T>, Option<Partition>, Option<Vec<u32>>, Option<Partition>) {
        (self.cloud, self.truth, self.shape_class, self.coarse_truth)
    }

    /// Reassembles a labeled cloud from parts, re-running every validation.
    pub fn from_parts(
        cloud: PointCloud<T>,
        truth: Option<Partition>,
        shape_class: Option<Vec<u32>>,
        coarse_truth: Option<Partition>,
    ) -> Result<Self> {
        let mut out = match truth {
            Some(t) => Self::new(cloud, t)?,
            None => Self::unlabeled(cloud),
        };
        if let Some(c) = shape_class {
            out = out.with_shape_class(c)?;
        }
        if let Some(c) = coarse_truth {
            out = out.with_coarse_truth(c)?;
        }
        Ok(out)
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Arithmetic mean of a non-empty set of positions.
pub fn centroid<T: Real>(points: &[Point<T>]) -> Result<Point<T>> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let n = T::from_usize_lossy(points.len());
    let (sx, sy) = points
        .iter()
        .fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p[0], sy + p[1]));
    Ok([sx / n, sy / n])
}

/// Centroid of the points selected by `indices`.
pub(crate) fn centroid_of<T: Real>(points: &[Point<T>], indices: &[usize]) -> Result<Point<T>> {
    if indices.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let n = T::from_usize_lossy(indices.len());
    let (sx, sy) = indices
        .iter()
        .fold((T::zero(), T::zero()), |(sx, sy), &i| (sx + points[i][0], sy + points[i][1]));
    Ok([sx / n, sy / n])
}
