use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::gold::{Benchmark, GoldGrid};
use super::pipeline::{market_model, run_single, MetricsRow, RunOutput};
use super::variants::Variant;
use crate::error::{Result, StageExt};
use crate::greeks::write_greeks_csv;
use crate::hedging::write_outcomes_csv;
use crate::io::{write_atomic, write_json};
use crate::models::MarketModel;

/// Where an experiment writes its files and caches benchmarks.
#[derive(Clone, Debug)]
pub struct OutputLayout {
    /// `<out>/<experiment name>`.
    pub dir: PathBuf,
    pub cache_dir: PathBuf,
}

impl OutputLayout {
    /// `out` overrides the configured output root, which defaults to `out`.
    pub fn new(cfg: &ExperimentConfig, out: Option<&Path>) -> Self {
        let root = out
            .map(Path::to_path_buf)
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let cache_dir = cfg.gold.cache_dir.clone().unwrap_or_else(|| root.join("gold-cache"));
        Self {
            dir: root.join(&cfg.name),
            cache_dir,
        }
    }
}

/// Summary returned by [`run_experiment`].
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
}

/// Benchmark Greeks for the configured case study, from the cache when possible.
pub fn benchmark_for(cfg: &ExperimentConfig, cache_dir: &Path) -> Result<Benchmark> {
    match market_model(cfg.case_study) {
        MarketModel::BlackScholes(p) => Ok(Benchmark::Exact(p)),
        MarketModel::LocalVolatility(p) => {
            let grid = cfg.test_grid_choice().grid();
            let g = GoldGrid::cached(&p, &grid, cfg.gold.n_paths, cfg.gold.seed, cache_dir)?;
            Ok(Benchmark::Gold(g))
        }
    }
}

/// Expanded runs with their variant tags.
pub fn planned_runs(cfg: &ExperimentConfig) -> Result<Vec<(ExperimentConfig, Option<Variant>)>> {
    let variants = cfg
        .variants
        .iter()
        .map(|v| Variant::parse(v))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    for c in cfg.expand() {
        if variants.is_empty() {
            runs.push((c, None));
        } else {
            for &v in &variants {
                runs.push((v.apply(&c), Some(v)));
            }
        }
    }
    Ok(runs)
}

fn run_dir_name(out: &RunOutput) -> String {
    match &out.metrics.variant {
        Some(v) => format!("{v}_{}", out.metrics.label),
        None => out.metrics.label.clone(),
    }
}

/// Writes the per-run artefacts into `dir`.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<()> {
    out.design.write_csv(&dir.join("design.csv"))?;
    out.model.save(&dir.join("model.json"))?;
    let grid = out.config.test_grid_choice().grid();
    write_greeks_csv(&dir.join("greeks.csv"), &out.surface.rows(&grid)?)?;
    if let Some(h) = &out.hedge {
        write_outcomes_csv(&dir.join("hedge.csv"), &h.outcomes)?;
    }
    write_json(&dir.join("metrics.json"), &out.metrics)
}

/// Runs every configuration of the experiment (sweep points × variants)
/// and writes per-run files plus the combined `metrics.json`.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let layout = OutputLayout::new(cfg, out);
    let bench = benchmark_for(cfg, &layout.cache_dir).stage("benchmark")?;
    let mut rows = Vec::new();
    for (c, v) in planned_runs(cfg)? {
        let tag = v.map(Variant::as_str);
        let run = run_single(&c, &bench, tag)?;
        write_run(&run, &layout.dir.join(run_dir_name(&run))).stage("output")?;
        rows.push(run.metrics);
    }
    write_json(&layout.dir.join("metrics.json"), &rows).stage("output")?;
    write_atomic(&layout.dir.join("config.toml"), cfg.to_toml()?.as_bytes()).stage("output")?;
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        dir: layout.dir,
        rows,
    })
}
