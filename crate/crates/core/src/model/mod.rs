//! The recurrent message-passing network.
//!
//! Inputs are encoded once into node latents `v'` and edge latents `e'`. A hidden
//! graph `(u, f)` starts at zero and is updated `steps` times:
//!
//! ```text
//! f[ij] <- relu(phi([v'_i, u_i, v'_j, u_j, e'_ij, f_ij]))
//! u[i]  <- relu(psi(sum over edges (i, j) of f[ij]))
//! ```
//!
//! After every step a shared decoder reads a displacement (and optionally class
//! logits) from `u`.

mod checkpoint;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, FORMAT_VERSION};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::graph::LocGraph;
use crate::real::{Point, Real};

/// Width of the raw edge feature vector `[distance, dir_x, dir_y]`.
pub const EDGE_FEATS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub latent_dim: usize,
    /// Number of recurrent steps K.
    pub steps: usize,
    /// 0 disables the class decoder.
    pub n_classes: usize,
    /// Must match the graph's `n_eigs`.
    pub n_eigs: usize,
    /// nm per model unit: edge distances are divided by it on input and decoded
    /// displacements multiplied by it on output.
    pub length_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 256,
            steps: 8,
            n_classes: 0,
            n_eigs: 5,
            length_scale: 50.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be >= 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.n_eigs == 0 {
            return Err(Error::InvalidConfig("n_eigs must be >= 1".into()));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "length_scale must be > 0, got {}",
                self.length_scale
            )));
        }
        Ok(())
    }
}

/// Affine map `y = x W^T + b` with `W` stored as (out, in).
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn uniform(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || T::lit(rng.random_range(-bound..=bound)));
        Self {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: &ArrayView2<T>) -> Array2<T> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// Every learnable tensor of the network. The same type doubles as a
/// gradient record.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub node_encoder: Linear<T>,
    pub edge_encoder: Linear<T>,
    /// Input width `6 * latent_dim`.
    pub phi: Linear<T>,
    pub psi: Linear<T>,
    pub disp_decoder: Linear<T>,
    pub class_decoder: Option<Linear<T>>,
}

impl<T: Real> ModelParams<T> {
    fn build(cfg: ModelConfig, mut make: impl FnMut(usize, usize) -> Linear<T>) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.latent_dim;
        Ok(Self {
            config: cfg,
            node_encoder: make(cfg.n_eigs, l),
            edge_encoder: make(EDGE_FEATS, l),
            phi: make(6 * l, l),
            psi: make(l, l),
            disp_decoder: make(l, 2),
            class_decoder: (cfg.n_classes > 0).then(|| make(l, cfg.n_classes)),
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(cfg, |i, o| Linear::uniform(i, o, &mut rng))
    }

    pub fn zeros(cfg: ModelConfig) -> Result<Self> {
        Self::build(cfg, Linear::zeros)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config).expect("config already validated")
    }

    /// Named layers in a fixed order.
    pub fn layers(&self) -> Vec<(&'static str, &Linear<T>)> {
        let mut v = vec![
            ("node_encoder", &self.node_encoder),
            ("edge_encoder", &self.edge_encoder),
            ("phi", &self.phi),
            ("psi", &self.psi),
            ("disp_decoder", &self.disp_decoder),
        ];
        if let Some(c) = &self.class_decoder {
            v.push(("class_decoder", c));
        }
        v
    }

    pub fn layers_mut(&mut self) -> Vec<(&'static str, &mut Linear<T>)> {
        let mut v = vec![
            ("node_encoder", &mut self.node_encoder),
            ("edge_encoder", &mut self.edge_encoder),
            ("phi", &mut self.phi),
            ("psi", &mut self.psi),
            ("disp_decoder", &mut self.disp_decoder),
        ];
        if let Some(c) = &mut self.class_decoder {
            v.push(("class_decoder", c));
        }
        v
    }

    /// All scalars as mutable references, in layer order, weight before bias.
    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers_mut()
            .into_iter()
            .flat_map(|(_, l)| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers()
            .into_iter()
            .flat_map(|(_, l)| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn n_values(&self) -> usize {
        self.values().count()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let conv = |l: &Linear<T>| Linear {
            weight: l.weight.mapv(|x| U::lit(x.as_f64())),
            bias: l.bias.mapv(|x| U::lit(x.as_f64())),
        };
        ModelParams {
            config: self.config,
            node_encoder: conv(&self.node_encoder),
            edge_encoder: conv(&self.edge_encoder),
            phi: conv(&self.phi),
            psi: conv(&self.psi),
            disp_decoder: conv(&self.disp_decoder),
            class_decoder: self.class_decoder.as_ref().map(conv),
        }
    }
}

/// Hidden node and edge states between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenGraph<T> {
    /// (nodes, latent_dim)
    pub u: Array2<T>,
    /// (edges, latent_dim)
    pub f: Array2<T>,
}

/// Per-step decoder outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutputs<T> {
    /// One (nodes, 2) array in nm per step.
    pub displacements: Vec<Array2<T>>,
    /// One (nodes, n_classes) array per step when the class decoder exists.
    pub class_logits: Option<Vec<Array2<T>>>,
}

impl<T: Real> StepOutputs<T> {
    pub fn steps(&self) -> usize {
        self.displacements.len()
    }

    pub fn displacement(&self, step: usize, node: usize) -> Point<T> {
        let d = &self.displacements[step];
        [d[[node, 0]], d[[node, 1]]]
    }
}

/// Activations of one step kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct StepTrace<T> {
    pub z_f: Array2<T>,
    pub f: Array2<T>,
    pub agg: Array2<T>,
    pub z_u: Array2<T>,
    pub u: Array2<T>,
}

/// Everything the backward pass needs besides the graph and the parameters.
#[derive(Clone, Debug)]
pub(crate) struct Trace<T> {
    /// Edge features with the distance column scaled.
    pub edge_in: Array2<T>,
    pub v: Array2<T>,
    pub e: Array2<T>,
    pub steps: Vec<StepTrace<T>>,
}

fn relu<T: Real>(x: &Array2<T>) -> Array2<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// `phi` weight column blocks: (v_i, u_i, v_j, u_j, e, f).
pub(crate) fn phi_block<T: Real>(w: &Array2<T>, block: usize, l: usize) -> ArrayView2<'_, T> {
    w.slice(s![.., block * l..(block + 1) * l])
}

fn check_dims<T: Real>(graph: &LocGraph<T>, params: &ModelParams<T>) -> Result<()> {
    let cfg = &params.config;
    if graph.node_feats().ncols() != cfg.n_eigs {
        return Err(Error::Dimension(format!(
            "graph has {} node features, model expects {}",
            graph.node_feats().ncols(),
            cfg.n_eigs
        )));
    }
    let l = cfg.latent_dim;
    let expected = [
        (&params.node_encoder, cfg.n_eigs, l),
        (&params.edge_encoder, EDGE_FEATS, l),
        (&params.phi, 6 * l, l),
        (&params.psi, l, l),
        (&params.disp_decoder, l, 2),
    ];
    for (layer, i, o) in expected {
        if layer.inputs() != i || layer.outputs() != o || layer.bias.len() != o {
            return Err(Error::Dimension(format!(
                "layer shape ({}, {}) does not match config ({o}, {i})",
                layer.outputs(),
                layer.inputs()
            )));
        }
    }
    match (&params.class_decoder, cfg.n_classes) {
        (None, 0) => Ok(()),
        (Some(c), n) if n > 0 && c.inputs() == l && c.outputs() == n && c.bias.len() == n => Ok(()),
        _ => Err(Error::Dimension("class decoder does not match n_classes".into())),
    }
}

pub(crate) fn scaled_edge_feats<T: Real>(graph: &LocGraph<T>, length_scale: f64) -> Array2<T> {
    let mut x = graph.edge_feats().clone();
    let s = T::lit(length_scale);
    x.column_mut(0).mapv_inplace(|d| d / s);
    x
}

pub(crate) fn run<T: Real>(graph: &LocGraph<T>, params: &ModelParams<T>, keep: bool) -> Result<(StepOutputs<T>, Option<Trace<T>>)> {
    check_dims(graph, params)?;
    let cfg = &params.config;
    let l = cfg.latent_dim;
    let (n, m) = (graph.n_nodes(), graph.n_edges());
    let scale = T::lit(cfg.length_scale);

    let edge_in = scaled_edge_feats(graph, cfg.length_scale);
    let v = params.node_encoder.apply(&graph.node_feats().view());
    let e = params.edge_encoder.apply(&edge_in.view());

    // input-only parts of phi, fixed across steps
    let w = &params.phi.weight;
    let a = v.dot(&phi_block(w, 0, l).t());
    let b = v.dot(&phi_block(w, 2, l).t());
    let c = e.dot(&phi_block(w, 4, l).t()) + &params.phi.bias;

    let mut u = Array2::<T>::zeros((n, l));
    let mut f = Array2::<T>::zeros((m, l));
    let mut displacements = Vec::with_capacity(cfg.steps);
    let mut logits = params.class_decoder.as_ref().map(|_| Vec::with_capacity(cfg.steps));
    let mut steps = Vec::new();

    for _ in 0..cfg.steps {
        let p = u.dot(&phi_block(w, 1, l).t());
        let q = u.dot(&phi_block(w, 3, l).t());
        let mut z_f = f.dot(&phi_block(w, 5, l).t());
        z_f += &c;
        for (k, &(i, j)) in graph.edges().iter().enumerate() {
            let mut row = z_f.row_mut(k);
            row += &a.row(i);
            row += &p.row(i);
            row += &b.row(j);
            row += &q.row(j);
        }
        let f_new = relu(&z_f);
        let mut agg = Array2::<T>::zeros((n, l));
        for (k, &(i, _)) in graph.edges().iter().enumerate() {
            let mut row = agg.row_mut(i);
            row += &f_new.row(k);
        }
        let z_u = params.psi.apply(&agg.view());
        let u_new = relu(&z_u);

        displacements.push(params.disp_decoder.apply(&u_new.view()) * scale);
        if let (Some(out), Some(dec)) = (logits.as_mut(), params.class_decoder.as_ref()) {
            out.push(dec.apply(&u_new.view()));
        }
        if keep {
            steps.push(StepTrace {
                z_f,
                f: f_new.clone(),
                agg,
                z_u,
                u: u_new.clone(),
            });
        }
        u = u_new;
        f = f_new;
    }

    let outputs = StepOutputs {
        displacements,
        class_logits: logits,
    };
    let trace = keep.then_some(Trace { edge_in, v, e, steps });
    Ok((outputs, trace))
}

/// Runs the network on one graph.
pub fn forward<T: Real>(graph: &LocGraph<T>, params: &ModelParams<T>) -> Result<StepOutputs<T>> {
    Ok(run(graph, params, false)?.0)
}

/// Shifts every localization by its predicted displacement at `step`.
pub fn collapse<T: Real>(cloud: &PointCloud<T>, outputs: &StepOutputs<T>, step: usize) -> Result<Vec<Point<T>>> {
    if step >= outputs.steps() {
        return Err(Error::StepOutOfRange {
            step,
            steps: outputs.steps(),
        });
    }
    let d = &outputs.displacements[step];
    if d.nrows() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "displacements",
            expected: cloud.len(),
            found: d.nrows(),
        });
    }
    Ok(cloud
        .points()
        .iter()
        .zip(d.axis_iter(Axis(0)))
        .map(|(p, r)| [p.x + r[0], p.y + r[1]])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, DeltaMode, GraphConfig};

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            latent_dim: 8,
            steps: 3,
            n_classes: 2,
            n_eigs: 5,
            length_scale: 50.0,
        }
    }

    fn graph() -> LocGraph<f64> {
        let pts: Vec<[f64; 2]> = (0..10)
            .map(|k| {
                let a = k as f64 * 0.7;
                [a.cos() * (20.0 + k as f64), a.sin() * 15.0 + k as f64]
            })
            .collect();
        let cloud = PointCloud::from_positions(&pts).unwrap();
        build_graph(&cloud, &GraphConfig { delta_mode: DeltaMode::Fixed(1e4), n_eigs: 5 }).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = ModelParams::<f64>::init(small_cfg(), 3).unwrap();
        let b = ModelParams::<f64>::init(small_cfg(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phi.weight.dim(), (8, 48));
        let bound = 1.0 / 48f64.sqrt();
        assert!(a.phi.weight.iter().all(|w| w.abs() <= bound));
        assert!(a.phi.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_params_give_zero_displacements() {
        let p = ModelParams::<f64>::zeros(small_cfg()).unwrap();
        let out = forward(&graph(), &p).unwrap();
        assert_eq!(out.steps(), 3);
        assert!(out.displacements.iter().all(|d| d.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = ModelParams::<f64>::init(ModelConfig { n_eigs: 4, ..small_cfg() }, 0).unwrap();
        assert!(matches!(forward(&graph(), &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn collapse_adds_displacements() {
        let cloud = PointCloud::from_positions(&[[10.0, 20.0]]).unwrap();
        let out = StepOutputs {
            displacements: vec![ndarray::arr2(&[[-10.0, -20.0]])],
            class_logits: None,
        };
        assert_eq!(collapse(&cloud, &out, 0).unwrap(), vec![[0.0, 0.0]]);
        assert!(matches!(collapse(&cloud, &out, 1), Err(Error::StepOutOfRange { .. })));
    }

    #[test]
    fn f32_forward_tracks_f64() {
        let p = ModelParams::<f64>::init(small_cfg(), 9).unwrap();
        let g = graph();
        let out = forward(&g, &p).unwrap();
        let pts: Vec<[f32; 2]> = g.coords().iter().map(|c| [c[0] as f32, c[1] as f32]).collect();
        let g32 = LocGraph::from_parts(pts, g.node_feats().mapv(|x| x as f32), g.edges().to_vec()).unwrap();
        let out32 = forward(&g32, &p.cast::<f32>()).unwrap();
        for (a, b) in out.displacements.iter().zip(&out32.displacements) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - *y as f64).abs() < 1e-3 * (1.0 + x.abs()));
            }
        }
    }
}
