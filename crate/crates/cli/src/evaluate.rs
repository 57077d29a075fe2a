use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use miro::io::read_cloud;
use miro::metrics::{evaluate, summarize, EvalReport, MetricConfig, DEFAULT_XI_NM};

use crate::run::{csv_files, guarded, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Ground-truth CSV, or a directory of them.
    #[arg(long)]
    gt: PathBuf,
    /// Prediction CSV, or a directory with the same file names.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pairing threshold in nm; use the cluster width when known.
    #[arg(long, default_value_t = DEFAULT_XI_NM)]
    xi: f64,
}

fn pairs(gt: &Path, pred: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    if gt.is_file() {
        return Ok(vec![(gt.to_path_buf(), pred.to_path_buf())]);
    }
    csv_files(gt)?
        .into_iter()
        .map(|g| {
            let name = g.file_name().expect("listed file has a name");
            let p = pred.join(name);
            if !p.is_file() {
                bail!("no prediction {} for {}", p.display(), g.display());
            }
            Ok((g, p))
        })
        .collect()
}

fn score(gt: &Path, pred: &Path, cfg: &MetricConfig) -> Result<EvalReport> {
    let g = read_cloud::<f64>(gt)?;
    let p = read_cloud::<f64>(pred)?;
    let truth = g.truth().with_context(|| format!("{} has no cluster_id column", gt.display()))?;
    let labels = p.truth().with_context(|| format!("{} has no cluster_id column", pred.display()))?;
    if g.len() != p.len() {
        bail!("{} has {} rows but {} has {}", gt.display(), g.len(), pred.display(), p.len());
    }
    Ok(evaluate(truth, labels, &g.cloud().positions(), cfg)?)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// `mean ± sd` with two decimals; blank when undefined.
pub fn display(stat: Option<(f64, Option<f64>)>) -> String {
    match stat {
        Some((m, Some(s))) => format!("{m:.2} ± {s:.2}"),
        Some((m, None)) => format!("{m:.2}"),
        None => String::new(),
    }
}

pub fn write_summary(path: &Path, rows: &[(&str, &[EvalReport])]) -> Result<()> {
    let mut s = String::from("method,metric,mean,sd,display\n");
    for (method, reports) in rows {
        for (metric, stat) in summarize(reports) {
            let (m, sd) = match stat {
                Some((m, sd)) => (Some(m), sd),
                None => (None, None),
            };
            s += &format!("{method},{metric},{},{},{}\n", cell(m), cell(sd), display(stat));
        }
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    let cfg = MetricConfig::new(args.xi)?;
    let pairs = pairs(&args.gt, &args.pred)?;
    let mut run = Run::start("evaluate", &args.out)?;
    run.input(&args.gt);
    run.input(&args.pred);
    guarded(run, |run| {
        let reports = pairs
            .par_iter()
            .map(|(g, p)| score(g, p, &cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut s = format!("field,{}\n", EvalReport::COLUMNS.join(","));
        for ((g, _), r) in pairs.iter().zip(&reports) {
            let name = g.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let vals: Vec<String> = r.values().iter().map(|v| cell(*v)).collect();
            s += &format!("{name},{}\n", vals.join(","));
        }
        fs::write(run.output("report.csv"), s)?;
        write_summary(&run.output("summary.csv"), &[("prediction", &reports)])?;
        for (metric, stat) in summarize(&reports) {
            println!("{metric:>16}  {}", display(stat));
        }
        #[derive(Serialize)]
        struct Snapshot {
            metrics: MetricConfig,
            fields: usize,
        }
        Ok((
            Snapshot {
                metrics: cfg,
                fields: reports.len(),
            },
            None,
        ))
    })
}
