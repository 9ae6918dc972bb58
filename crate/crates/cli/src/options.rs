//! Shared flags, the optional JSON config file, and resolution helpers.
//!
//! Every flag mirrors a snake_case key in the config file one-to-one;
//! command-line values override file values. Reports embed the fully
//! resolved configuration so identical configurations reproduce identical
//! bytes.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use thinfield::prob::{Density, Mode};
use thinfield::tree::{RootedTree, TreeSpec};

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Tree spec: a path to a JSON document, or inline JSON starting with '{'.
    #[arg(long)]
    pub tree: Option<String>,
    /// Occupation density, e.g. 0.999 or 999/1000.
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated density grid; rows are evaluated per grid point.
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Vec<String>,
    /// Comma-separated radii (meaning depends on the subcommand).
    #[arg(long, value_delimiter = ',')]
    pub radius: Vec<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Arithmetic mode: exact (rationals) or log (log-domain floats).
    #[arg(long)]
    pub mode: Option<String>,
    /// Output format: csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Pushout-count budget for enumerations.
    #[arg(long)]
    pub max_n: Option<u32>,
    /// Interior-size budget for brute-force enumerations.
    #[arg(long)]
    pub max_interior: Option<u32>,
    /// Evaluate grid points on up to this many threads.
    #[arg(long)]
    pub jobs: Option<u32>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with the same keys as the flags (snake_case); flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    tree: Option<String>,
    p: Option<String>,
    p_grid: Option<Vec<String>>,
    radius: Option<Vec<u32>>,
    seed: Option<u64>,
    mode: Option<String>,
    format: Option<String>,
    max_n: Option<u32>,
    max_interior: Option<u32>,
    jobs: Option<u32>,
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Common {
    /// Applies config-file fallbacks, leaving explicit flags untouched.
    pub fn resolve(mut self) -> Result<Common> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: FileConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        self.tree = self.tree.or(file.tree);
        self.p = self.p.or(file.p);
        if self.p_grid.is_empty() {
            self.p_grid = file.p_grid.unwrap_or_default();
        }
        if self.radius.is_empty() {
            self.radius = file.radius.unwrap_or_default();
        }
        self.seed = self.seed.or(file.seed);
        self.mode = self.mode.or(file.mode);
        self.format = self.format.or(file.format);
        self.max_n = self.max_n.or(file.max_n);
        self.max_interior = self.max_interior.or(file.max_interior);
        self.jobs = self.jobs.or(file.jobs);
        self.out = self.out.or(file.out);
        Ok(self)
    }

    /// The tree spec: inline JSON, a file, or the default root-3 binary
    /// truncation of depth 9.
    pub fn tree_spec(&self) -> Result<TreeSpec> {
        let Some(raw) = &self.tree else {
            return Ok(TreeSpec::binary(9));
        };
        let text = if raw.trim_start().starts_with('{') {
            raw.clone()
        } else {
            std::fs::read_to_string(raw).with_context(|| format!("reading tree spec {raw}"))?
        };
        let spec: TreeSpec = serde_json::from_str(&text).context("parsing tree spec")?;
        Ok(spec)
    }

    pub fn build_tree(&self) -> Result<Arc<RootedTree>> {
        Ok(self.tree_spec()?.build()?)
    }

    /// The density grid: --p-grid, or the single --p.
    pub fn density_grid(&self) -> Result<Vec<Density>> {
        let raw: Vec<&String> = if self.p_grid.is_empty() {
            self.p.iter().collect()
        } else {
            self.p_grid.iter().collect()
        };
        if raw.is_empty() {
            bail!("a density is required: pass --p or --p-grid");
        }
        raw.into_iter().map(|s| Ok(Density::parse(s)?)).collect()
    }

    pub fn density(&self) -> Result<Density> {
        let grid = self.density_grid()?;
        if grid.len() != 1 {
            bail!("this subcommand takes a single --p");
        }
        Ok(grid[0])
    }

    pub fn mode(&self) -> Result<Mode> {
        match self.mode.as_deref() {
            None | Some("exact") => Ok(Mode::Exact),
            Some("log") => Ok(Mode::Log),
            Some(other) => bail!("unknown mode {other:?} (expected exact or log)"),
        }
    }

    pub fn format(&self) -> Result<Format> {
        match self.format.as_deref() {
            None | Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            Some(other) => bail!("unknown format {other:?} (expected csv or json)"),
        }
    }

    pub fn radii(&self) -> Result<Vec<u32>> {
        if self.radius.is_empty() {
            bail!("a radius list is required: pass --radius r1,r2,...");
        }
        Ok(self.radius.clone())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Resolved configuration object embedded into every report. `--jobs`
    /// is omitted: it schedules work but never changes a byte of output.
    pub fn describe(&self, subcommand: &str, tree_id: Option<&str>) -> serde_json::Value {
        serde_json::json!({
            "subcommand": subcommand,
            "tree_id": tree_id,
            "p": self.p,
            "p_grid": self.p_grid,
            "radius": self.radius,
            "seed": self.seed,
            "mode": self.mode.as_deref().unwrap_or("exact"),
            "format": self.format.as_deref().unwrap_or("csv"),
            "max_n": self.max_n,
            "max_interior": self.max_interior,
        })
    }

    /// Writes the report body to --out or stdout.
    pub fn emit(&self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?
            }
            None => print!("{body}"),
        }
        Ok(())
    }
}

/// Evaluates grid items on up to `jobs` threads, preserving input order so
/// parallelism never changes output bytes.
pub fn run_grid<T, I, F>(items: Vec<I>, jobs: u32, eval: F) -> Result<Vec<T>>
where
    T: Send,
    I: Send + Sync,
    F: Fn(&I) -> Result<T> + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&eval).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs as usize)
        .build()
        .context("building thread pool")?;
    pool.install(|| {
        use rayon::prelude::*;
        items.par_iter().map(&eval).collect()
    })
}
