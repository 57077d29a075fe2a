//! Per-step losses and their gradients with respect to the decoder outputs.
//!
//! Everything here works in model units: coordinates and displacements are
//! divided by the model's length scale.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DisplacementTargets, LossNorm, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::LocGraph;
use crate::model::StepOutputs;
use crate::real::Real;

/// Loss terms, each averaged over steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub disp: f64,
    pub dist: f64,
    pub class: f64,
}

impl LossBreakdown {
    pub(crate) fn add(&mut self, o: &LossBreakdown) {
        self.total += o.total;
        self.disp += o.disp;
        self.dist += o.dist;
        self.class += o.class;
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.total *= s;
        self.disp *= s;
        self.dist *= s;
        self.class *= s;
    }
}

/// Gradients of the loss with respect to each step's raw decoder outputs.
pub(crate) struct OutputGrads<T> {
    /// (nodes, 2) per step, model units.
    pub disp: Vec<Array2<T>>,
    pub logits: Option<Vec<Array2<T>>>,
}

fn sgn<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Which target field a step is supervised with.
pub(crate) fn target_for_step<'a, T>(
    targets: &'a DisplacementTargets<T>,
    step: usize,
    k_star: Option<usize>,
) -> Result<&'a Array2<T>> {
    match k_star {
        Some(ks) if step >= ks => targets.coarse.as_ref().ok_or(Error::MissingCoarseTargets),
        _ => Ok(&targets.fine),
    }
}

/// Inverse-frequency weights normalized to mean 1 over the nodes.
pub(crate) fn class_weights(classes: &[u32], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &c in classes {
        counts[c as usize] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count().max(1);
    let n = classes.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (present as f64 * c as f64) })
        .collect()
}

fn check_classes(classes: &[u32], n: usize, n_classes: usize) -> Result<()> {
    if classes.len() != n {
        return Err(Error::LengthMismatch {
            what: "class labels",
            expected: n,
            found: classes.len(),
        });
    }
    if let Some((i, &c)) = classes.iter().enumerate().find(|(_, &c)| c as usize >= n_classes) {
        return Err(Error::InvalidLabel {
            index: i,
            label: c as i64,
        });
    }
    Ok(())
}

/// Loss of one graph and, when `want_grad`, its gradient with respect to the
/// decoder outputs. `outputs` are in nm as returned by the model.
pub(crate) fn evaluate<T: Real>(
    outputs: &StepOutputs<T>,
    graph: &LocGraph<T>,
    targets: &DisplacementTargets<T>,
    classes: Option<&[u32]>,
    length_scale: f64,
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<OutputGrads<T>>)> {
    let k = outputs.steps();
    let n = graph.n_nodes();
    let edges = graph.edges();
    let s = T::lit(length_scale);
    if targets.fine.nrows() != n {
        return Err(Error::LengthMismatch {
            what: "targets",
            expected: n,
            found: targets.fine.nrows(),
        });
    }
    if let Some(ks) = cfg.k_star {
        if ks == 0 || ks >= k {
            return Err(Error::InvalidConfig(format!("k_star {ks} must lie in [1, {})", k)));
        }
    }

    let kf = T::from_usize_lossy(k);
    let nf = T::from_usize_lossy(n);
    let ef = T::from_usize_lossy(edges.len());
    let coords: Vec<[T; 2]> = graph.coords().iter().map(|c| [c[0] / s, c[1] / s]).collect();

    let mut out = LossBreakdown::default();
    let mut g_disp = Vec::with_capacity(if want_grad { k } else { 0 });
    let mut g_logits: Option<Vec<Array2<T>>> = None;

    let class_setup = match (&outputs.class_logits, classes) {
        (Some(logits), Some(c)) => {
            let nc = logits[0].ncols();
            check_classes(c, n, nc)?;
            let w = if cfg.class_weights {
                class_weights(c, nc)
            } else {
                vec![1.0; nc]
            };
            Some((logits, c, w))
        }
        (Some(_), None) => return Err(Error::MissingTruth("class labels")),
        _ => None,
    };

    for step in 0..k {
        let target = target_for_step(targets, step, cfg.k_star)?;
        let y = &outputs.displacements[step];
        let mut gy = Array2::<T>::zeros((n, 2));

        // displacement error
        let mut lr = T::zero();
        for i in 0..n {
            let dx = y[[i, 0]] / s - target[[i, 0]] / s;
            let dy = y[[i, 1]] / s - target[[i, 1]] / s;
            match cfg.loss_norm {
                LossNorm::L1 => {
                    lr += dx.abs() + dy.abs();
                    gy[[i, 0]] = sgn(dx);
                    gy[[i, 1]] = sgn(dy);
                }
                LossNorm::Euclidean => {
                    let r = dx.hypot(dy);
                    lr += r;
                    if r > T::zero() {
                        gy[[i, 0]] = dx / r;
                        gy[[i, 1]] = dy / r;
                    }
                }
            }
        }
        let wr = T::one() / (kf * nf);
        gy.mapv_inplace(|v| v * wr);
        out.disp += (lr / nf).as_f64();

        // neighbor distance preservation
        if !edges.is_empty() {
            let mut ld = T::zero();
            let wd = T::one() / (kf * ef);
            for &(i, j) in edges {
                let pi = [coords[i][0] + y[[i, 0]] / s, coords[i][1] + y[[i, 1]] / s];
                let pj = [coords[j][0] + y[[j, 0]] / s, coords[j][1] + y[[j, 1]] / s];
                let ti = [coords[i][0] + target[[i, 0]] / s, coords[i][1] + target[[i, 1]] / s];
                let tj = [coords[j][0] + target[[j, 0]] / s, coords[j][1] + target[[j, 1]] / s];
                let (ddx, ddy) = (pi[0] - pj[0], pi[1] - pj[1]);
                let d = ddx.hypot(ddy);
                let d0 = (ti[0] - tj[0]).hypot(ti[1] - tj[1]);
                ld += (d - d0).abs();
                if want_grad && d > T::zero() {
                    let g = sgn(d - d0) * wd / d;
                    gy[[i, 0]] += g * ddx;
                    gy[[i, 1]] += g * ddy;
                    gy[[j, 0]] -= g * ddx;
                    gy[[j, 1]] -= g * ddy;
                }
            }
            out.dist += (ld / ef).as_f64();
        }
        if want_grad {
            g_disp.push(gy);
        }

        // classification
        if let Some((logits, c, w)) = &class_setup {
            let z = &logits[step];
            let nc = z.ncols();
            let alpha = T::lit(cfg.alpha);
            let mut lc = T::zero();
            let mut gz = Array2::<T>::zeros((n, nc));
            for i in 0..n {
                let row = z.row(i);
                let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
                let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
                let wi = T::lit(w[c[i] as usize]);
                lc += wi * (lse - row[c[i] as usize]);
                if want_grad {
                    let scale = alpha * wi / (kf * nf);
                    for q in 0..nc {
                        let p = (row[q] - lse).exp();
                        let onehot = if q == c[i] as usize { T::one() } else { T::zero() };
                        gz[[i, q]] = scale * (p - onehot);
                    }
                }
            }
            out.class += (alpha * lc / nf).as_f64();
            if want_grad {
                g_logits.get_or_insert_with(Vec::new).push(gz);
            }
        }
    }

    out.scale(1.0 / k as f64);
    out.total = out.disp + out.dist + out.class;
    let grads = want_grad.then_some(OutputGrads {
        disp: g_disp,
        logits: g_logits,
    });
    Ok((out, grads))
}
