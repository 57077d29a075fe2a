mod bench;
mod evaluate;
mod infer;
mod run;
mod simulate;
mod svg;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "miro", version, about = "Learned preprocessing and clustering of localization point clouds")]
struct Cli {
    /// Worker threads (default: all cores). `--threads 1` is the reproducibility reference.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled clouds from a preset or scenario file.
    Simulate(simulate::Args),
    /// Train a model on a directory of labeled clouds.
    Train(train::Args),
    /// Cluster one cloud, with or without the learned preprocessing.
    Infer(infer::Args),
    /// Score predictions against ground truth.
    Evaluate(evaluate::Args),
    /// Compare plain DBSCAN with model + DBSCAN on a preset.
    Bench(bench::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Train(a) => train::run(a),
        Command::Infer(a) => infer::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
