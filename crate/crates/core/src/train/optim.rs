//! First-order optimizers over the flattened parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    SgdMomentum { momentum: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
            OptimizerKind::SgdMomentum { momentum } => (0.0..1.0).contains(&momentum),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Optimizer moments, stored as f64 so checkpoints resume exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    /// First moment (Adam) or velocity (momentum SGD).
    pub m: Vec<f64>,
    /// Second moment; empty for momentum SGD.
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: &OptimizerKind, n: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n],
            v: match kind {
                OptimizerKind::Adam { .. } => vec![0.0; n],
                OptimizerKind::SgdMomentum { .. } => Vec::new(),
            },
        }
    }

    /// Applies one update. Parameters are updated in f64 and cast back.
    pub fn apply<T: Real>(&mut self, kind: &OptimizerKind, lr: f64, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.step += 1;
        let t = self.step as i32;
        let g: Vec<f64> = grads.values().map(|x| x.as_f64()).collect();
        match *kind {
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (k, p) in params.values_mut().enumerate() {
                    self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g[k];
                    self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g[k] * g[k];
                    let mh = self.m[k] / c1;
                    let vh = self.v[k] / c2;
                    *p = T::lit(p.as_f64() - lr * mh / (vh.sqrt() + eps));
                }
            }
            OptimizerKind::SgdMomentum { momentum } => {
                for (k, p) in params.values_mut().enumerate() {
                    self.m[k] = momentum * self.m[k] + g[k];
                    *p = T::lit(p.as_f64() - lr * self.m[k]);
                }
            }
        }
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm<T: Real>(grads: &mut ModelParams<T>, max_norm: f64) -> f64 {
    let norm = grads.values().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = T::lit(max_norm / norm);
        for g in grads.values_mut() {
            *g *= s;
        }
    }
    norm
}
