use std::path::PathBuf;

use anyhow::{bail, Result};
use rayon::prelude::*;

use miro::io::write_cloud;
use miro::simulate::{derive_seed, preset, Scenario};

use crate::run::{guarded, print_json, read_json, resolve_seed, Run};

#[derive(clap::Args)]
pub struct Args {
    /// Named scenario, e.g. scenario8, ring, npc.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective scenario and exit.
    #[arg(long)]
    print_config: bool,
}

fn scenario(args: &Args) -> Result<Scenario> {
    let s = match (&args.preset, &args.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => read_json(path)?,
        (None, None) if args.print_config => preset("scenario5")?,
        (None, None) => bail!("one of --preset or --config is required"),
    };
    s.validate()?;
    Ok(s)
}

pub fn run(args: Args) -> Result<()> {
    let mut sc = scenario(&args)?;
    sc.spec.seed = resolve_seed(args.seed, sc.spec.seed)?;
    if args.print_config {
        return print_json(&sc);
    }
    let out = args.out.as_deref().expect("clap enforces --out");
    let mut run = Run::start("simulate", out)?;
    if let Some(c) = &args.config {
        run.input(c);
    }
    guarded(run, |run| {
        let clouds = (0..args.count)
            .into_par_iter()
            .map(|i| sc.sample(derive_seed(sc.spec.seed, i as u64)))
            .collect::<miro::Result<Vec<_>>>()?;
        for (i, c) in clouds.iter().enumerate() {
            write_cloud(run.output(&format!("cloud_{i:05}.csv")), c)?;
        }
        let seed = sc.spec.seed;
        Ok((sc, Some(seed)))
    })
}
