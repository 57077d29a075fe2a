use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use miro::cluster::{dbscan, enforce_hierarchy, run_pipeline, DbscanConfig, PipelineConfig};
use miro::graph::{build_graph, GraphConfig};
use miro::io::{read_cloud, write_cloud};
use miro::model::load_checkpoint;
use miro::{LabeledCloud, ModelParams, Partition, PointCloud};

use crate::run::{guarded, print_json, read_json, Run};
use crate::svg;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub graph: GraphConfig,
    pub fine: DbscanConfig,
    pub coarse: Option<DbscanConfig>,
    pub class_mode: bool,
    pub fine_step: Option<usize>,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            graph: GraphConfig::default(),
            fine: DbscanConfig { eps: 25.0, min_pts: 5 },
            coarse: None,
            class_mode: false,
            fine_step: None,
        }
    }
}

#[derive(clap::Args)]
pub struct Args {
    /// Cloud CSV to cluster.
    #[arg(long, required_unless_present = "print_config")]
    input: Option<PathBuf>,
    /// Model checkpoint written by `miro train`.
    #[arg(long, required_unless_present_any = ["no_miro", "print_config"])]
    model: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Inference configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_pts: Option<usize>,
    #[arg(long, requires = "coarse_min_pts")]
    coarse_eps: Option<f64>,
    #[arg(long, requires = "coarse_eps")]
    coarse_min_pts: Option<usize>,
    /// Assign a class to every cluster from the class decoder.
    #[arg(long)]
    class_mode: bool,
    /// Plain DBSCAN on the raw coordinates.
    #[arg(long)]
    no_miro: bool,
    /// Also write the collapsed coordinates.
    #[arg(long)]
    collapsed: bool,
    /// Also write an SVG scatter plot.
    #[arg(long)]
    svg: bool,
    /// Also write the graph as an edge list.
    #[arg(long)]
    dump_graph: bool,
    #[arg(long)]
    print_config: bool,
}

pub struct Prediction {
    pub fine: Partition,
    pub coarse: Option<Partition>,
    pub classes: Option<Vec<u32>>,
    pub collapsed: Option<Vec<[f64; 2]>>,
}

/// Clusters `cloud` with the model, or with plain DBSCAN when `params` is `None`.
pub fn predict(
    cloud: &PointCloud,
    params: Option<(&ModelParams, Option<usize>)>,
    cfg: &InferConfig,
) -> miro::Result<Prediction> {
    match params {
        Some((p, k_star)) => {
            let pc = PipelineConfig {
                fine: cfg.fine,
                coarse: cfg.coarse,
                class_mode: cfg.class_mode,
                fine_step: cfg.fine_step,
            };
            let r = run_pipeline(cloud, p, k_star, &cfg.graph, &pc)?;
            Ok(Prediction {
                classes: r.point_classes(),
                fine: r.fine,
                coarse: r.coarse,
                collapsed: Some(r.collapsed_fine),
            })
        }
        None => {
            let pts = cloud.positions();
            let mut fine = dbscan(&pts, &cfg.fine)?;
            let coarse = match &cfg.coarse {
                Some(c) => {
                    let part = dbscan(&pts, c)?;
                    fine = enforce_hierarchy(&fine, &part)?;
                    Some(part)
                }
                None => None,
            };
            Ok(Prediction {
                fine,
                coarse,
                classes: None,
                collapsed: None,
            })
        }
    }
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: InferConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => InferConfig::default(),
    };
    if let Some(e) = args.eps {
        cfg.fine.eps = e;
    }
    if let Some(m) = args.min_pts {
        cfg.fine.min_pts = m;
    }
    if let (Some(eps), Some(min_pts)) = (args.coarse_eps, args.coarse_min_pts) {
        cfg.coarse = Some(DbscanConfig { eps, min_pts });
    }
    cfg.class_mode |= args.class_mode;
    cfg.graph.validate()?;
    cfg.fine.validate()?;
    if let Some(c) = &cfg.coarse {
        c.validate()?;
    }
    if args.no_miro && cfg.class_mode {
        bail!("--class-mode needs the model; it cannot be combined with --no-miro");
    }
    if args.print_config {
        return print_json(&cfg);
    }
    let input = args.input.as_deref().expect("clap enforces --input");
    let out = args.out.as_deref().expect("clap enforces --out");
    let cloud = read_cloud::<f64>(input)?.into_parts().0;
    let model = match (&args.model, args.no_miro) {
        (Some(p), false) => Some(load_checkpoint::<f64>(p)?),
        _ => None,
    };

    let mut run = Run::start("infer", out)?;
    run.input(input);
    if let Some(p) = &args.model {
        run.input(p);
    }
    if let Some(p) = &args.config {
        run.input(p);
    }
    guarded(run, |run| {
        let pred = predict(&cloud, model.as_ref().map(|(p, k)| (p, *k)), &cfg)?;
        if args.dump_graph {
            let g = build_graph(&cloud, &cfg.graph)?;
            g.write_edge_list(fs::File::create(run.output("graph.csv"))?)?;
        }
        let labeled = LabeledCloud::from_parts(cloud.clone(), Some(pred.fine.clone()), pred.classes.clone(), pred.coarse.clone())?;
        write_cloud(run.output("labels.csv"), &labeled)?;
        if args.collapsed {
            let pts = pred.collapsed.clone().unwrap_or_else(|| cloud.positions());
            let c = LabeledCloud::new(PointCloud::from_positions(&pts)?, pred.fine.clone())?;
            write_cloud(run.output("collapsed.csv"), &c)?;
        }
        if args.svg {
            fs::write(run.output("scatter.svg"), svg::scatter(&cloud.positions(), &pred.fine))?;
        }
        println!("{} clusters, {} noise points", pred.fine.n_clusters(), pred.fine.n_noise());
        #[derive(Serialize)]
        struct Snapshot<'a> {
            infer: &'a InferConfig,
            no_miro: bool,
        }
        Ok((
            serde_json::to_value(Snapshot {
                infer: &cfg,
                no_miro: model.is_none(),
            })?,
            None,
        ))
    })
}
