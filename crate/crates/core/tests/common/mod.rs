//! Helpers shared by the integration tests.
#![allow(dead_code)]

use miro::graph::{build_graph, DeltaMode, GraphConfig};
use miro::model::ModelParams;
use miro::train::{loss, DisplacementTargets, Sample, TrainConfig};
use miro::LocGraph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, size: f64) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random_range(0.0..size), rng.random_range(0.0..size)]).collect()
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, size: f64, delta: f64, n_eigs: usize) -> LocGraph {
    let pts = random_points(rng, n, size);
    let cloud = miro::PointCloud::from_positions(&pts).unwrap();
    build_graph(&cloud, &GraphConfig { delta_mode: DeltaMode::Fixed(delta), n_eigs }).unwrap()
}

/// A sample with random targets and class labels.
pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, n_classes: usize, coarse: bool) -> Sample<f64> {
    let graph = random_graph(rng, n, 200.0, 1e4, 5);
    let field = |r: &mut ChaCha8Rng| Array2::from_shape_fn((n, 2), |_| r.random_range(-40.0..40.0));
    let fine = field(rng);
    let coarse = coarse.then(|| field(rng));
    let classes = (n_classes > 0).then(|| (0..n).map(|_| rng.random_range(0..n_classes as u32)).collect());
    Sample {
        graph,
        targets: DisplacementTargets { fine, coarse },
        classes,
    }
}

pub fn sample_loss(params: &ModelParams<f64>, s: &Sample<f64>, cfg: &TrainConfig) -> f64 {
    let out = miro::model::forward(&s.graph, params).unwrap();
    loss(&out, &s.graph, &s.targets, s.classes.as_deref(), &params.config, cfg)
        .unwrap()
        .total
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares reverse-mode gradients with central differences, one parameter at a
/// time. Parameters whose ±h probes land in different smooth pieces of the loss
/// are skipped.
pub fn gradient_check(params: &ModelParams<f64>, s: &Sample<f64>, cfg: &TrainConfig, h: f64) -> GradCheck {
    let (_, grads) = miro::train::loss_and_gradients(params, s, cfg).unwrap();
    let analytic: Vec<f64> = grads.values().copied().collect();
    let mut out = GradCheck {
        max_rel_err: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        *plus.values_mut().nth(k).unwrap() += h;
        let mut minus = params.clone();
        *minus.values_mut().nth(k).unwrap() -= h;
        let pp = miro::train::kink_pattern(&plus, s, cfg).unwrap();
        let pm = miro::train::kink_pattern(&minus, s, cfg).unwrap();
        if pp != pm {
            out.skipped += 1;
            continue;
        }
        let num = (sample_loss(&plus, s, cfg) - sample_loss(&minus, s, cfg)) / (2.0 * h);
        let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
        out.max_rel_err = out.max_rel_err.max(rel);
        out.checked += 1;
    }
    out
}

/// Labeled points laid out so that every ground-truth cluster sits alone on a
/// 1 µm grid. Each block is `(gt, pred, count, offset from the gt center)`;
/// blocks with gt NOISE are centered on the center of their predicted cluster
/// or, when that is noise too, placed far away.
pub struct Fixture {
    pub points: Vec<[f64; 2]>,
    pub gt: miro::Partition,
    pub pred: miro::Partition,
}

fn grid_center(k: i64) -> [f64; 2] {
    [1000.0 * (k % 5) as f64, 1000.0 * (k / 5) as f64]
}

pub fn fixture(blocks: &[(i64, i64, usize, [f64; 2])], pred_home: impl Fn(i64) -> i64) -> Fixture {
    let (mut points, mut gt, mut pred) = (Vec::new(), Vec::new(), Vec::new());
    let mut far = 0usize;
    for &(g, p, count, off) in blocks {
        for i in 0..count {
            // small ring so that no two points coincide
            let a = i as f64 * 2.399;
            let jitter = [3.0 * a.cos(), 3.0 * a.sin()];
            let pos = if g >= 0 {
                let c = grid_center(g);
                [c[0] + off[0] + jitter[0], c[1] + off[1] + jitter[1]]
            } else if p >= 0 {
                let c = grid_center(pred_home(p));
                [c[0] + off[0] + jitter[0], c[1] + off[1] + jitter[1]]
            } else {
                far += 1;
                [-10_000.0 - 7.0 * (far % 50) as f64, -10_000.0 - 7.0 * (far / 50) as f64]
            };
            points.push(pos);
            gt.push(g);
            pred.push(p);
        }
    }
    Fixture {
        points,
        gt: miro::Partition::new(gt).unwrap(),
        pred: miro::Partition::new(pred).unwrap(),
    }
}

/// Method A of the worked metrics example: 20 clusters of 50, 1000 background.
/// Every cluster loses 5 points to noise and absorbs 10 background points.
pub fn method_a() -> Fixture {
    let mut blocks = vec![(-1, -1, 800, [0.0, 0.0])];
    for k in 0..20 {
        blocks.push((k, k, 45, [0.0, 0.0]));
        blocks.push((k, -1, 5, [0.0, 0.0]));
        blocks.push((-1, k, 10, [0.0, 0.0]));
    }
    fixture(&blocks, |p| p)
}

/// Method B: every cluster loses 9 points to noise, clusters 11-20 are split in
/// two (21 + 20), and the first predicted cluster of each ground-truth cluster
/// absorbs 5 background points. 900 background points stay unclustered.
pub fn method_b() -> Fixture {
    let mut blocks = vec![(-1, -1, 900, [0.0, 0.0])];
    let mut home = Vec::new();
    for k in 0..20i64 {
        let first = home.len() as i64;
        home.push(k);
        blocks.push((k, -1, 9, [0.0, 0.0]));
        blocks.push((-1, first, 5, [0.0, 0.0]));
        if k < 10 {
            blocks.push((k, first, 41, [0.0, 0.0]));
        } else {
            blocks.push((k, first, 21, [0.0, 0.0]));
            home.push(k);
            blocks.push((k, first + 1, 20, [30.0, 0.0]));
        }
    }
    fixture(&blocks, move |p| home[p as usize])
}
