use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use miro::cluster::{dbscan, tune_dbscan, DbscanConfig, TuneCase};
use miro::graph::{build_graph, GraphConfig};
use miro::metrics::{evaluate, mean_sd, EvalReport, MetricConfig};
use miro::model::{collapse, forward, load_checkpoint, save_checkpoint, ModelConfig};
use miro::simulate::{
    augment_dataset, derive_seed, extract_seed_clusters, gen_pair_test, generate, preset, AugmentSpec, Background,
    ClusterGroup, CountDist, ScenarioSpec, Shape,
};
use miro::train::{fit, RunConfig, Sample, TrainConfig};
use miro::{LabeledCloud, ModelParams, Partition};

use crate::evaluate::write_summary;
use crate::run::{guarded, read_json, resolve_seed, Run};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Sigma,
    Nm,
}

#[derive(clap::Args)]
pub struct Args {
    /// `pairtest` or a scenario preset name.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    /// Evaluation clouds (per distance for `pairtest`).
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Clouds used to tune DBSCAN, disjoint from the evaluation clouds.
    #[arg(long, default_value_t = 20)]
    tune_count: usize,
    /// Pair separations for `pairtest`.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 3.0, 4.0])]
    distances: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Unit::Sigma)]
    unit: Unit,
    /// Cluster width in nm; scales the DBSCAN grid and is the default pairing threshold.
    #[arg(long, default_value_t = 25.0)]
    sigma: f64,
    /// Mean localizations per `pairtest` cluster.
    #[arg(long, default_value_t = 90.0)]
    mean_count: f64,
    #[arg(long)]
    xi: Option<f64>,
    /// Trained model; without it a small one is trained first.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Run configuration for the model trained when `--model` is absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    train_clouds: usize,
    #[arg(long)]
    epochs: Option<usize>,
    /// Only run plain DBSCAN.
    #[arg(long)]
    no_miro: bool,
    #[arg(long)]
    seed: Option<u64>,
}

const EPS_FACTORS: [f64; 8] = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];
const MIN_PTS: [usize; 5] = [3, 5, 8, 12, 20];

fn bench_run_config() -> RunConfig {
    RunConfig {
        model: ModelConfig {
            latent_dim: 32,
            steps: 4,
            ..ModelConfig::default()
        },
        train: TrainConfig {
            epochs: 60,
            batch_size: 4,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        },
        graph: GraphConfig::default(),
    }
}

struct Case {
    cloud: LabeledCloud,
    points: Vec<[f64; 2]>,
    collapsed: Option<Vec<[f64; 2]>>,
}

struct Model {
    params: ModelParams,
    k_star: Option<usize>,
    graph: GraphConfig,
}

impl Model {
    fn collapse(&self, cloud: &LabeledCloud) -> miro::Result<Vec<[f64; 2]>> {
        let g = build_graph(cloud.cloud(), &self.graph)?;
        let out = forward(&g, &self.params)?;
        let step = match self.k_star {
            Some(k) => k - 1,
            None => self.params.config.steps - 1,
        };
        collapse(cloud.cloud(), &out, step)
    }
}

fn cases(clouds: Vec<LabeledCloud>, model: Option<&Model>) -> Result<Vec<Case>> {
    Ok(clouds
        .into_par_iter()
        .map(|cloud| {
            let collapsed = model.map(|m| m.collapse(&cloud)).transpose()?;
            Ok(Case {
                points: cloud.cloud().positions(),
                collapsed,
                cloud,
            })
        })
        .collect::<miro::Result<Vec<_>>>()?)
}

fn truth(c: &Case) -> &Partition {
    c.cloud.truth().expect("simulated clouds are labeled")
}

fn tune(cases: &[Case], miro: bool, sigma: f64, xi: f64) -> Result<DbscanConfig> {
    let tc: Vec<TuneCase<'_, f64>> = cases
        .iter()
        .map(|c| TuneCase {
            cluster_points: if miro { c.collapsed.as_deref().expect("collapsed") } else { &c.points },
            eval_points: &c.points,
            truth: truth(c),
        })
        .collect();
    let eps: Vec<f64> = EPS_FACTORS.iter().map(|f| f * sigma).collect();
    Ok(tune_dbscan(&tc, &eps, &MIN_PTS, xi)?.0)
}

fn score(cases: &[Case], miro: bool, db: &DbscanConfig, xi: f64) -> Result<Vec<EvalReport>> {
    let cfg = MetricConfig::new(xi)?;
    Ok(cases
        .par_iter()
        .map(|c| {
            let pts = if miro { c.collapsed.as_deref().expect("collapsed") } else { &c.points };
            let pred = dbscan(pts, db)?;
            evaluate(truth(c), &pred, &c.points, &cfg)
        })
        .collect::<miro::Result<Vec<_>>>()?)
}

fn pair_seed_spec(sigma: f64, mean_count: f64) -> ScenarioSpec {
    ScenarioSpec {
        extent: [500.0, 500.0],
        cluster_groups: vec![ClusterGroup {
            count: CountDist::Fixed(3),
            molecules: CountDist::Fixed(mean_count.round().max(1.0) as usize),
            shape: Shape::Gaussian { sigma, sigma_max: None },
            class_id: 1,
        }],
        background: Background::Count(0),
        min_cluster_separation: 8.0 * sigma,
        placement_attempts: 10_000,
        seed: 0,
    }
}

fn train_model(args: &Args, seed: u64, run: &mut Run) -> Result<Model> {
    let mut cfg: RunConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => bench_run_config(),
    };
    cfg.train.seed = seed;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    let train_seed = derive_seed(seed, 2_000_000);
    let clouds = if args.preset == "pairtest" {
        let src = generate(&pair_seed_spec(args.sigma, args.mean_count), train_seed)?;
        let seeds = extract_seed_clusters(&src)?;
        let spec = AugmentSpec {
            min_separation: 6.0 * args.sigma,
            ..AugmentSpec::default()
        };
        augment_dataset(&seeds, &spec, args.train_clouds, [1000.0, 1000.0], train_seed)?
    } else {
        let sc = preset(&args.preset)?;
        (0..args.train_clouds)
            .into_par_iter()
            .map(|i| sc.sample(derive_seed(train_seed, i as u64)))
            .collect::<miro::Result<Vec<_>>>()?
    };
    let samples = clouds
        .par_iter()
        .map(|c| Sample::prepare(c, &cfg.graph))
        .collect::<miro::Result<Vec<_>>>()?;
    let result = fit(&samples, &cfg.model, &cfg.train, &cfg.graph, None)?;
    save_checkpoint(&run.output("model.json"), &result.params, cfg.train.k_star)?;
    Ok(Model {
        params: result.params,
        k_star: cfg.train.k_star,
        graph: cfg.graph,
    })
}

#[derive(Serialize)]
struct Tuned {
    distance: Option<f64>,
    method: &'static str,
    eps: f64,
    min_pts: usize,
}

pub fn run(args: Args) -> Result<()> {
    let seed = resolve_seed(args.seed, 0)?;
    let xi = args.xi.unwrap_or(args.sigma);
    if args.preset != "pairtest" {
        preset(&args.preset)?;
    }
    if args.count == 0 || args.tune_count == 0 {
        bail!("--count and --tune-count must be positive");
    }
    let mut run = Run::start("bench", &args.out)?;
    if let Some(p) = &args.model {
        run.input(p);
    }
    guarded(run, |run| {
        let model = match (&args.model, args.no_miro) {
            (_, true) => None,
            (Some(p), false) => {
                let (params, k_star) = load_checkpoint::<f64>(p)?;
                let graph = match &args.config {
                    Some(c) => read_json::<RunConfig>(c)?.graph,
                    None => GraphConfig::default(),
                };
                Some(Model { params, k_star, graph })
            }
            (None, false) => Some(train_model(&args, seed, run)?),
        };
        let methods: Vec<(&'static str, bool)> = if model.is_some() {
            vec![("dbscan", false), ("miro_dbscan", true)]
        } else {
            vec![("dbscan", false)]
        };
        let mut tuned = Vec::new();

        if args.preset == "pairtest" {
            let mut s = String::from("distance,distance_nm,method,eps,min_pts,ji_c_mean,ji_c_sd,n\n");
            for &d in &args.distances {
                let sep = match args.unit {
                    Unit::Sigma => d * args.sigma,
                    Unit::Nm => d,
                };
                let gen = |offset: u64, n: usize| {
                    (0..n)
                        .into_par_iter()
                        .map(|i| gen_pair_test(args.sigma, sep, args.mean_count, derive_seed(seed, offset + i as u64)))
                        .collect::<miro::Result<Vec<_>>>()
                };
                let tune_cases = cases(gen(1_000_000, args.tune_count)?, model.as_ref())?;
                let eval_cases = cases(gen(0, args.count)?, model.as_ref())?;
                for &(name, m) in &methods {
                    let db = tune(&tune_cases, m, args.sigma, xi)?;
                    let ji: Vec<f64> = score(&eval_cases, m, &db, xi)?.iter().map(|r| r.ji_c).collect();
                    let (mean, sd) = mean_sd(&ji).expect("count > 0");
                    s += &format!(
                        "{d},{sep},{name},{},{},{mean},{},{}\n",
                        db.eps,
                        db.min_pts,
                        sd.map_or_else(String::new, |v| v.to_string()),
                        ji.len()
                    );
                    println!("d={d:<6} {name:<12} JI_c {mean:.3}");
                    tuned.push(Tuned {
                        distance: Some(d),
                        method: name,
                        eps: db.eps,
                        min_pts: db.min_pts,
                    });
                }
            }
            fs::write(run.output("bench.csv"), s)?;
        } else {
            let sc = preset(&args.preset)?;
            let gen = |offset: u64, n: usize| {
                (0..n)
                    .into_par_iter()
                    .map(|i| sc.sample(derive_seed(seed, offset + i as u64)))
                    .collect::<miro::Result<Vec<_>>>()
            };
            let tune_cases = cases(gen(1_000_000, args.tune_count)?, model.as_ref())?;
            let eval_cases = cases(gen(0, args.count)?, model.as_ref())?;
            let mut all = Vec::new();
            for &(name, m) in &methods {
                let db = tune(&tune_cases, m, args.sigma, xi)?;
                all.push((name, score(&eval_cases, m, &db, xi)?));
                tuned.push(Tuned {
                    distance: None,
                    method: name,
                    eps: db.eps,
                    min_pts: db.min_pts,
                });
            }
            let rows: Vec<(&str, &[EvalReport])> = all.iter().map(|(n, r)| (*n, r.as_slice())).collect();
            write_summary(&run.output("bench.csv"), &rows)?;
            for (name, reports) in &all {
                let ji: Vec<f64> = reports.iter().map(|r| r.ji_c).collect();
                println!("{name:<12} JI_c {:.3}", mean_sd(&ji).map_or(f64::NAN, |m| m.0));
            }
        }

        #[derive(Serialize)]
        struct Snapshot {
            preset: String,
            count: usize,
            tune_count: usize,
            distances: Vec<f64>,
            unit: Unit,
            sigma: f64,
            mean_count: f64,
            xi: f64,
            tuned: Vec<Tuned>,
        }
        Ok((
            Snapshot {
                preset: args.preset.clone(),
                count: args.count,
                tune_count: args.tune_count,
                distances: args.distances.clone(),
                unit: args.unit,
                sigma: args.sigma,
                mean_count: args.mean_count,
                xi,
                tuned,
            },
            Some(seed),
        ))
    })
}
