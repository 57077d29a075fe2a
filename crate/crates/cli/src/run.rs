//! Output directory bookkeeping shared by all subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    duration_s: f64,
}

/// Tracks what a command writes so a failed run can be cleaned up.
pub struct Run {
    command: &'static str,
    dir: PathBuf,
    created_dir: bool,
    outputs: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    start: Instant,
}

impl Run {
    pub fn start(command: &'static str, dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            command,
            dir: dir.to_path_buf(),
            created_dir,
            outputs: Vec::new(),
            inputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Registers an output (file or directory) relative to the run directory.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        if !self.outputs.contains(&p) {
            self.outputs.push(p.clone());
        }
        p
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes the manifest last, via a temporary file.
    pub fn finish<C: Serialize>(self, config: &C, seed: Option<u64>) -> Result<()> {
        let rel = |p: &PathBuf| p.strip_prefix(&self.dir).unwrap_or(p).display().to_string();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config)?,
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs.iter().map(rel).collect(),
            duration_s: self.start.elapsed().as_secs_f64(),
        };
        let path = self.dir.join(MANIFEST);
        let tmp = self.dir.join(".manifest.json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Removes everything this run wrote.
    pub fn abort(self) {
        if self.created_dir {
            let _ = fs::remove_dir_all(&self.dir);
            return;
        }
        for p in self.outputs.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir_all(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
        let _ = fs::remove_file(self.dir.join(".manifest.json.tmp"));
    }
}

/// Runs `body`, finishing the manifest on success and cleaning up on failure.
pub fn guarded<C: Serialize>(
    mut run: Run,
    body: impl FnOnce(&mut Run) -> Result<(C, Option<u64>)>,
) -> Result<()> {
    match body(&mut run) {
        Ok((config, seed)) => run.finish(&config, seed),
        Err(e) => {
            run.abort();
            Err(e)
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Effective seed: the command-line flag, then `MIRO_SEED`, then the config.
pub fn resolve_seed(flag: Option<u64>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("MIRO_SEED") {
        Ok(v) => v.trim().parse().with_context(|| format!("MIRO_SEED is not an integer: {v:?}")),
        Err(_) => Ok(config),
    }
}

/// CSV files of a directory in name order, or the path itself if it is a file.
pub fn csv_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .csv files in {}", path.display());
    }
    Ok(files)
}
