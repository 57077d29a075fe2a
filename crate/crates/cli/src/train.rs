use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use miro::io::read_cloud;
use miro::model::save_checkpoint;
use miro::train::{fit, read_run_config, resume, RunConfig, Sample};

use crate::run::{csv_files, guarded, print_json, read_json, resolve_seed, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of labeled cloud CSVs.
    #[arg(long, required_unless_present = "print_config")]
    data: Option<PathBuf>,
    /// Run configuration JSON with `model`, `train` and `graph` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Continue the run in `--out` from its latest checkpoint.
    #[arg(long, conflicts_with = "config")]
    resume: bool,
    #[arg(long)]
    print_config: bool,
}

pub const MODEL_FILE: &str = "model.json";

pub fn load_samples(data: &Path, cfg: &RunConfig) -> Result<Vec<Sample<f64>>> {
    let files = csv_files(data)?;
    files
        .par_iter()
        .map(|f| {
            let c = read_cloud::<f64>(f)?;
            if c.truth().is_none() {
                bail!("{} has no cluster_id column; training needs labeled clouds", f.display());
            }
            if cfg.model.n_classes > 0 && c.shape_class().is_none() {
                bail!("{} has no class_id column but the model decodes classes", f.display());
            }
            if cfg.train.k_star.is_some() && c.coarse_truth().is_none() {
                bail!("{} has no coarse_id column but training is multiscale", f.display());
            }
            Sample::prepare(&c, &cfg.graph).with_context(|| format!("preparing {}", f.display()))
        })
        .collect()
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg: RunConfig = match (&args.config, args.resume, &args.out) {
        (_, true, Some(out)) => read_run_config(out)?,
        (Some(p), _, _) => read_json(p)?,
        _ => RunConfig::default(),
    };
    if !args.resume {
        cfg.train.seed = resolve_seed(args.seed, cfg.train.seed)?;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.model.validate()?;
    cfg.graph.validate()?;
    cfg.train.validate(&cfg.model)?;
    if args.print_config {
        return print_json(&cfg);
    }
    let data = args.data.as_deref().expect("clap enforces --data");
    let out = args.out.as_deref().expect("clap enforces --out");
    let samples = load_samples(data, &cfg)?;

    let mut run = Run::start("train", out)?;
    run.input(data);
    if let Some(c) = &args.config {
        run.input(c);
    }
    guarded(run, |run| {
        let result = if args.resume {
            if args.epochs.is_some() {
                // the stored config is what resume reads
                let path = run.dir().join("config.json");
                std::fs::write(&path, serde_json::to_string_pretty(&cfg)?)?;
            }
            resume(&samples, run.dir())?
        } else {
            for name in ["config.json", "checkpoints", "loss.csv"] {
                run.output(name);
            }
            fit(&samples, &cfg.model, &cfg.train, &cfg.graph, Some(run.dir()))?
        };
        save_checkpoint(&run.output(MODEL_FILE), &result.params, cfg.train.k_star)?;
        if let Some(last) = result.history.last() {
            println!("epochs {}  final loss {:.6}", result.history.len(), last.total);
        }
        if result.late_increase {
            eprintln!("warning: training loss trended upward over the final quarter of epochs");
        }
        let seed = cfg.train.seed;
        Ok((cfg, Some(seed)))
    })
}
