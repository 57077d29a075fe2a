//! Graph-neural-network preprocessing for clustering single-molecule localization
//! point clouds.
//!
//! A recurrent message-passing network predicts, for every localization, a
//! displacement that moves members of the same cluster toward a common center.
//! The collapsed cloud is then clustered with DBSCAN and the labels are carried
//! back to the original coordinates. The crate also ships the scenario
//! simulators, the training loop, and the evaluation metrics used to score it.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the CLI and file formats use.

pub mod cloud;
pub mod cluster;
mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod model;
mod real;
pub mod simulate;
pub mod train;

pub use cloud::{centroid, BACKGROUND_CLASS, NOISE};
pub use error::{Error, Result};
pub use real::{Point, Real};

pub type Localization = cloud::Localization<f64>;
pub type Extent = cloud::Extent<f64>;
pub type PointCloud = cloud::PointCloud<f64>;
pub type LabeledCloud = cloud::LabeledCloud<f64>;
pub use cloud::Partition;

pub type LocGraph = graph::LocGraph<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type StepOutputs = model::StepOutputs<f64>;
pub type DisplacementTargets = train::DisplacementTargets<f64>;
pub type PipelineResult = cluster::PipelineResult<f64>;

pub type PointCloudF32 = cloud::PointCloud<f32>;
pub type LocGraphF32 = graph::LocGraph<f32>;
pub type ModelParamsF32 = model::ModelParams<f32>;
