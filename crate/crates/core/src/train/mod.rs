//! Displacement targets, losses, gradients and the training loop.

mod backward;
mod loss;
mod optim;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use loss::LossBreakdown;
pub use optim::{clip_global_norm, OptimizerKind, OptimizerState};

use crate::cloud::{centroid_of, LabeledCloud, Partition};
use crate::error::{file_err, Error, Result};
use crate::graph::{build_graph, GraphConfig, LocGraph};
use crate::model::{self, Checkpoint, ModelConfig, ModelParams, StepOutputs};
use crate::real::Real;

/// Norm applied to the per-node displacement error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossNorm {
    /// `|dx| + |dy|`
    #[default]
    L1,
    /// `sqrt(dx^2 + dy^2)`
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Graphs per gradient step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Steps `0..k_star` learn the fine targets, `k_star..K` the coarse ones.
    pub k_star: Option<usize>,
    /// Weight of the classification term.
    pub alpha: f64,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    pub loss_norm: LossNorm,
    /// Inverse-frequency weighting of the classification term.
    pub class_weights: bool,
    /// Clip gradients to this global L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            k_star: None,
            alpha: 1.0,
            seed: 0,
            checkpoint_every: 10,
            loss_norm: LossNorm::L1,
            class_weights: false,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if let Some(ks) = self.k_star {
            if ks == 0 || ks >= model.steps {
                return Err(Error::InvalidConfig(format!(
                    "k_star must satisfy 1 <= k_star < steps ({}), got {ks}",
                    model.steps
                )));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidConfig("alpha must be >= 0".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig("clip_norm must be > 0".into()));
            }
        }
        self.optimizer.validate()
    }
}

/// Per-node displacement targets in nm. Noise nodes get zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementTargets<T> {
    /// (nodes, 2)
    pub fine: Array2<T>,
    pub coarse: Option<Array2<T>>,
}

fn targets_for<T: Real>(points: &[[T; 2]], part: &Partition) -> Result<Array2<T>> {
    let mut t = Array2::zeros((points.len(), 2));
    for members in part.clusters().values() {
        let c = centroid_of(points, members)?;
        for &i in members {
            t[[i, 0]] = c[0] - points[i][0];
            t[[i, 1]] = c[1] - points[i][1];
        }
    }
    Ok(t)
}

/// Vectors from every clustered point to its cluster centroid, for the fine and
/// (when present) coarse ground truth.
pub fn gt_displacements<T: Real>(labeled: &LabeledCloud<T>) -> Result<DisplacementTargets<T>> {
    let truth = labeled.truth().ok_or(Error::MissingTruth("cluster labels"))?;
    let pts = labeled.cloud().positions();
    Ok(DisplacementTargets {
        fine: targets_for(&pts, truth)?,
        coarse: labeled.coarse_truth().map(|c| targets_for(&pts, c)).transpose()?,
    })
}

/// A graph with its supervision, ready for training.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub graph: LocGraph<T>,
    pub targets: DisplacementTargets<T>,
    pub classes: Option<Vec<u32>>,
}

impl<T: Real> Sample<T> {
    pub fn prepare(labeled: &LabeledCloud<T>, graph_cfg: &GraphConfig) -> Result<Self> {
        Ok(Self {
            graph: build_graph(labeled.cloud(), graph_cfg)?,
            targets: gt_displacements(labeled)?,
            classes: labeled.shape_class().map(<[u32]>::to_vec),
        })
    }
}

/// Loss of given model outputs.
pub fn loss<T: Real>(
    outputs: &StepOutputs<T>,
    graph: &LocGraph<T>,
    targets: &DisplacementTargets<T>,
    classes: Option<&[u32]>,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    Ok(loss::evaluate(outputs, graph, targets, classes, model_cfg.length_scale, cfg, false)?.0)
}

/// Loss of one sample and its exact gradient with respect to every parameter.
pub fn loss_and_gradients<T: Real>(
    params: &ModelParams<T>,
    sample: &Sample<T>,
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, ModelParams<T>)> {
    let (outputs, trace) = model::run(&sample.graph, params, true)?;
    let (l, og) = loss::evaluate(
        &outputs,
        &sample.graph,
        &sample.targets,
        sample.classes.as_deref(),
        params.config.length_scale,
        cfg,
        true,
    )?;
    let mut grads = params.zeros_like();
    if let (Some(trace), Some(og)) = (trace, og) {
        backward::backward(&sample.graph, params, &trace, &og, &mut grads);
    }
    Ok((l, grads))
}

/// Mean loss and gradient over `indices` of `samples`. Per-graph work runs in
/// parallel; the reduction is in index order, so the result does not depend on
/// the thread count.
pub fn batch_gradients<T: Real>(
    params: &ModelParams<T>,
    samples: &[Sample<T>],
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, ModelParams<T>)> {
    if indices.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let parts: Vec<Result<(LossBreakdown, ModelParams<T>)>> = indices
        .par_iter()
        .map(|&i| {
            let (l, g) = loss_and_gradients(params, &samples[i], cfg)?;
            if !l.total.is_finite() {
                return Err(Error::Divergence { graph: i });
            }
            Ok((l, g))
        })
        .collect();
    let mut total = LossBreakdown::default();
    let mut grads = params.zeros_like();
    for part in parts {
        let (l, g) = part?;
        total.add(&l);
        for (a, b) in grads.values_mut().zip(g.values()) {
            *a += *b;
        }
    }
    let inv = 1.0 / indices.len() as f64;
    total.scale(inv);
    let t_inv = T::lit(inv);
    for a in grads.values_mut() {
        *a *= t_inv;
    }
    Ok((total, grads))
}

/// Signs of every rectifier pre-activation and every absolute-value argument
/// in the loss. Two parameter vectors with the same pattern lie in the same
/// smooth piece of the loss, which finite-difference checks rely on.
pub fn kink_pattern<T: Real>(params: &ModelParams<T>, sample: &Sample<T>, cfg: &TrainConfig) -> Result<Vec<bool>> {
    let (outputs, trace) = model::run(&sample.graph, params, true)?;
    let trace = trace.expect("trace requested");
    let mut pat = Vec::new();
    for st in &trace.steps {
        pat.extend(st.z_f.iter().map(|&z| z > T::zero()));
        pat.extend(st.z_u.iter().map(|&z| z > T::zero()));
    }
    let s = T::lit(params.config.length_scale);
    let g = &sample.graph;
    for (k, y) in outputs.displacements.iter().enumerate() {
        let t = loss::target_for_step(&sample.targets, k, cfg.k_star)?;
        for i in 0..g.n_nodes() {
            pat.push(y[[i, 0]] > t[[i, 0]]);
            pat.push(y[[i, 1]] > t[[i, 1]]);
        }
        for &(i, j) in g.edges() {
            let c = g.coords();
            let d = |a: usize, v: &Array2<T>| [c[a][0] + v[[a, 0]], c[a][1] + v[[a, 1]]];
            let (pi, pj, ti, tj) = (d(i, y), d(j, y), d(i, t), d(j, t));
            let dp = (pi[0] - pj[0]).hypot(pi[1] - pj[1]) / s;
            let dt = (ti[0] - tj[0]).hypot(ti[1] - tj[1]) / s;
            pat.push(dp > dt);
        }
    }
    Ok(pat)
}

/// Everything written to `config.json` of a run directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub graph: GraphConfig,
}

/// Training state at the end of an epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub model: Checkpoint,
    pub optimizer: OptimizerState,
    pub history: Vec<LossBreakdown>,
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    pub params: ModelParams<T>,
    /// Mean loss per epoch.
    pub history: Vec<LossBreakdown>,
    /// Set when the loss trended upward over the final quarter of epochs.
    pub late_increase: bool,
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Least-squares slope of the total loss over the last quarter of epochs.
fn late_slope(history: &[LossBreakdown]) -> f64 {
    let n = (history.len() / 4).max(2);
    if history.len() < 4 {
        return 0.0;
    }
    let tail = &history[history.len() - n..];
    let xm = (n - 1) as f64 / 2.0;
    let ym = tail.iter().map(|h| h.total).sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, h) in tail.iter().enumerate() {
        num += (k as f64 - xm) * (h.total - ym);
        den += (k as f64 - xm).powi(2);
    }
    num / den
}

pub fn checkpoint_path(run_dir: &Path, epoch: usize) -> PathBuf {
    run_dir.join("checkpoints").join(format!("epoch_{epoch:05}.json"))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut f = fs::File::create(&tmp).map_err(file_err(&tmp))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.flush().map_err(file_err(&tmp))?;
    fs::rename(&tmp, path).map_err(file_err(path))
}

fn write_loss_csv(path: &Path, history: &[LossBreakdown]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Header(e.to_string()))?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["epoch", "L_total", "L_r", "L_d", "L_class"]).map_err(io)?;
    for (k, h) in history.iter().enumerate() {
        w.write_record([
            (k + 1).to_string(),
            h.total.to_string(),
            h.disp.to_string(),
            h.dist.to_string(),
            h.class.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains a model from scratch. With `run_dir`, the run configuration, loss
/// curve and checkpoints are written there.
pub fn fit<T: Real>(
    samples: &[Sample<T>],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    graph_cfg: &GraphConfig,
    run_dir: Option<&Path>,
) -> Result<FitResult<T>> {
    train_cfg.validate(model_cfg)?;
    let params = ModelParams::init(*model_cfg, train_cfg.seed)?;
    let opt = OptimizerState::new(&train_cfg.optimizer, params.n_values());
    let run = RunConfig {
        model: *model_cfg,
        train: train_cfg.clone(),
        graph: *graph_cfg,
    };
    if let Some(dir) = run_dir {
        fs::create_dir_all(dir.join("checkpoints")).map_err(file_err(dir))?;
        write_json(&dir.join("config.json"), &run)?;
    }
    train_loop(samples, &run, params, opt, Vec::new(), run_dir)
}

/// Latest checkpoint of a run directory, if any.
pub fn latest_checkpoint(run_dir: &Path) -> Result<Option<PathBuf>> {
    let dir = run_dir.join("checkpoints");
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<PathBuf> = None;
    for entry in fs::read_dir(&dir).map_err(file_err(&dir))? {
        let p = entry.map_err(file_err(&dir))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("epoch_") && name.ends_with(".json") && best.as_ref().is_none_or(|b| p > *b) {
            best = Some(p);
        }
    }
    Ok(best)
}

pub fn read_train_state(path: &Path) -> Result<TrainState> {
    let f = fs::File::open(path).map_err(file_err(path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

pub fn read_run_config(run_dir: &Path) -> Result<RunConfig> {
    let path = run_dir.join("config.json");
    let f = fs::File::open(&path).map_err(file_err(&path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

/// Continues a run from its latest checkpoint until the configured epoch count.
/// The samples must be the ones the run started with.
pub fn resume<T: Real>(samples: &[Sample<T>], run_dir: &Path) -> Result<FitResult<T>> {
    let run = read_run_config(run_dir)?;
    run.train.validate(&run.model)?;
    let Some(path) = latest_checkpoint(run_dir)? else {
        let params = ModelParams::init(run.model, run.train.seed)?;
        let opt = OptimizerState::new(&run.train.optimizer, params.n_values());
        return train_loop(samples, &run, params, opt, Vec::new(), Some(run_dir));
    };
    let state = read_train_state(&path)?;
    let params = state.model.to_params()?;
    if state.history.len() != state.epoch || state.optimizer.m.len() != params.n_values() {
        return Err(Error::InvalidConfig(format!("inconsistent checkpoint {}", path.display())));
    }
    train_loop(samples, &run, params, state.optimizer, state.history, Some(run_dir))
}

fn train_loop<T: Real>(
    samples: &[Sample<T>],
    run: &RunConfig,
    mut params: ModelParams<T>,
    mut opt: OptimizerState,
    mut history: Vec<LossBreakdown>,
    run_dir: Option<&Path>,
) -> Result<FitResult<T>> {
    if samples.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let cfg = &run.train;
    for epoch in history.len()..cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut epoch_rng(cfg.seed, epoch));
        let mut sum = LossBreakdown::default();
        for batch in order.chunks(cfg.batch_size) {
            let (l, mut g) = batch_gradients(&params, samples, batch, cfg)?;
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut g, c);
            }
            opt.apply(&cfg.optimizer, cfg.learning_rate, &mut params, &g);
            let mut weighted = l;
            weighted.scale(batch.len() as f64);
            sum.add(&weighted);
        }
        sum.scale(1.0 / samples.len() as f64);
        history.push(sum);
        log::info!(
            "epoch {}: loss {:.6} (disp {:.6}, dist {:.6}, class {:.6})",
            epoch + 1,
            sum.total,
            sum.disp,
            sum.dist,
            sum.class
        );

        if let Some(dir) = run_dir {
            write_loss_csv(&dir.join("loss.csv"), &history)?;
            let done = epoch + 1;
            let due = cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0;
            if due || done == cfg.epochs {
                let state = TrainState {
                    epoch: done,
                    model: Checkpoint::from_params(&params, cfg.k_star),
                    optimizer: opt.clone(),
                    history: history.clone(),
                };
                write_json(&checkpoint_path(dir, done), &state)?;
            }
        }
    }
    let late_increase = late_slope(&history) > 0.0;
    if late_increase {
        log::warn!("training loss increased over the final quarter of epochs");
    }
    Ok(FitResult {
        params,
        history,
        late_increase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;

    #[test]
    fn targets_point_to_centroid() {
        let cloud = PointCloud::from_positions(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [10.0, 0.0]]).unwrap();
        let lc = LabeledCloud::new(cloud, Partition::new(vec![0, 0, 0, 0, -1]).unwrap()).unwrap();
        let t = gt_displacements(&lc).unwrap();
        assert_eq!(t.fine.row(0).to_vec(), vec![-1.0, -1.0]);
        assert_eq!(t.fine.row(4).to_vec(), vec![0.0, 0.0]);
        let s: f64 = t.fine.column(0).sum() + t.fine.column(1).sum();
        assert_eq!(s, 0.0);
        assert!(t.coarse.is_none());
    }

    #[test]
    fn k_star_bounds() {
        let m = ModelConfig {
            steps: 4,
            ..Default::default()
        };
        assert!(TrainConfig { k_star: Some(0), ..Default::default() }.validate(&m).is_err());
        assert!(TrainConfig { k_star: Some(4), ..Default::default() }.validate(&m).is_err());
        assert!(TrainConfig { k_star: Some(3), ..Default::default() }.validate(&m).is_ok());
    }

    #[test]
    fn late_slope_sign() {
        let h = |v: f64| LossBreakdown { total: v, ..Default::default() };
        let down: Vec<_> = (0..12).map(|k| h(10.0 - k as f64)).collect();
        assert!(late_slope(&down) < 0.0);
        let up: Vec<_> = (0..12).map(|k| h(k as f64)).collect();
        assert!(late_slope(&up) > 0.0);
    }
}
