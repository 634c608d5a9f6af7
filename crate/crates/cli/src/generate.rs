use std::path::{Path, PathBuf};

use anyhow::Context;
use inverse_lmp::dataset::{generate_dataset, inject_lmp_noise, write_dataset, DatasetConfig, NoiseSpec};
use inverse_lmp::experiments::{ieee14_baseline, random_baseline};
use inverse_lmp::grid::{ieee14, load_grid, save_grid, Grid};
use inverse_lmp::scenario::OfferCurve;
use serde::{Deserialize, Serialize};

use crate::{config, Infeasible};
use crate::manifest::{create_dir, git_describe, write_json};

/// Where offer baselines come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSource {
    /// The quadratic cost data of the 14-bus study case.
    #[default]
    Ieee14,
    /// Random quadratic curves drawn with the given seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    /// Grid file; the built-in 14-bus case when absent.
    pub grid: Option<PathBuf>,
    pub costs: CostSource,
    pub dataset: DatasetConfig,
    /// Optional price corruption applied to the published prices.
    pub noise: Option<NoiseSpec>,
}

pub fn load_case(cfg: &GenerateConfig, config_path: Option<&Path>) -> anyhow::Result<(Grid, Vec<OfferCurve>)> {
    let grid = match &cfg.grid {
        Some(p) => load_grid(&config::resolve(config_path, p))?,
        None => ieee14(),
    };
    let n_blocks = cfg.dataset.n_blocks;
    let baseline = match cfg.costs {
        CostSource::Ieee14 => ieee14_baseline(&grid, n_blocks)?,
        CostSource::Random { seed } => random_baseline(&grid, seed, n_blocks)?,
    };
    Ok((grid, baseline))
}

pub fn run(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let mut cfg: GenerateConfig = config::load(config_path)?;
    if let Some(s) = seed {
        cfg.dataset.seed = s;
    }
    let (grid, baseline) = load_case(&cfg, config_path)?;
    let mut ds = generate_dataset(&grid, &baseline, &cfg.dataset)?;
    if cfg.dataset.n_scenarios > 0 && ds.observations.is_empty() {
        let reason = ds.skipped.first().map(|s| s.reason.as_str()).unwrap_or("no observations");
        return Err(Infeasible(format!("all {} scenarios were infeasible (first: {reason})", cfg.dataset.n_scenarios)).into());
    }
    create_dir(out)?;
    if let Some(spec) = &cfg.noise {
        let (noisy, log) = inject_lmp_noise(&grid, &ds.observations, spec)?;
        ds.observations = noisy;
        write_json(&out.join("noise_log.json"), &log)?;
    }
    save_grid(&grid, &out.join("grid.json")).context("writing grid.json")?;
    let manifest = write_dataset(out, &grid, &ds, serde_json::to_value(&cfg)?, &git_describe())?;
    println!(
        "{} observations ({} scenarios skipped) on {} written to {}",
        manifest.n_observations,
        ds.skipped.len(),
        grid.name,
        out.display()
    );
    if !ds.covers_every_block() && cfg.dataset.n_scenarios > 0 {
        log::warn!("some generator blocks were never marginal: {:?}", ds.marginal_counts);
    }
    Ok(())
}
