use std::path::Path;

use anyhow::Context;
use inverse_lmp::dataset::{read_ground_truth, read_observations, Manifest};
use inverse_lmp::experiments::recovery_report;
use inverse_lmp::grid::load_grid;
use inverse_lmp::inverse::{gd_recover, training_set_from_observations, BlockReport, GdConfig, RecoveryRate};
use lp_kernel::BINDING_TOL;
use serde::{Deserialize, Serialize};

use crate::manifest::{create_dir, write_json, RunManifest};
use crate::{config, usage};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoverConfig {
    pub gd: GdConfig,
    /// Blocks per offer; read from the dataset when absent.
    pub n_blocks: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RecoveryReport {
    pub p: f64,
    pub iterations: usize,
    pub eta: f64,
    pub c_bar: f64,
    pub n_observations: usize,
    pub final_loss: f64,
    /// `n·p·c̄^p/√T` with `n` = blocks that have samples.
    pub bound_epsilon: f64,
    /// The same bound with `n` = every generator block.
    pub bound_epsilon_all: f64,
    pub recovery_rate: RecoveryRate,
    pub mean_rel_error: Option<f64>,
    pub blocks: Vec<BlockReport>,
}

fn n_blocks_of(data: &Path, truth: Option<usize>) -> anyhow::Result<usize> {
    if let Some(n) = truth {
        return Ok(n);
    }
    let path = data.join("manifest.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))?;
    manifest
        .config
        .pointer("/dataset/n_blocks")
        .and_then(|v| v.as_u64())
        .map(|n| n as usize)
        .ok_or_else(|| usage(format!("{}: no dataset.n_blocks; set n_blocks in the config", path.display())))
}

pub fn run(data: &Path, config_path: Option<&Path>, p: Option<f64>, out: &Path) -> anyhow::Result<()> {
    if !data.is_dir() {
        return Err(usage(format!("dataset directory {} does not exist", data.display())));
    }
    let mut cfg: RecoverConfig = config::load(config_path)?;
    if let Some(p) = p {
        cfg.gd.p = p;
    }
    cfg.gd.validate()?;

    let grid_path = data.join("grid.json");
    let obs_path = data.join("observations.jsonl");
    let truth_path = data.join("ground_truth.json");
    let grid = load_grid(&grid_path)?;
    let observations = read_observations(&obs_path)?;
    let truth = if truth_path.exists() { Some(read_ground_truth(&truth_path)?) } else { None };
    let n_blocks = match cfg.n_blocks {
        Some(n) => n,
        None => n_blocks_of(data, truth.as_ref().map(|t| t.n_blocks))?,
    };

    let (_, training) = training_set_from_observations(&observations, &grid, n_blocks, BINDING_TOL)?;
    let result = gd_recover(&training, &cfg.gd)?;
    let blocks = recovery_report(&training, &cfg.gd, &result, truth.as_ref());
    let errors: Vec<f64> = blocks.iter().filter_map(|b| b.rel_error).collect();
    let report = RecoveryReport {
        p: cfg.gd.p,
        iterations: cfg.gd.iterations,
        eta: result.eta,
        c_bar: cfg.gd.c_bar,
        n_observations: observations.len(),
        final_loss: result.final_loss,
        bound_epsilon: result.bound_epsilon,
        bound_epsilon_all: result.bound_epsilon_all,
        recovery_rate: RecoveryRate::from_training(&training),
        mean_rel_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        blocks,
    };

    create_dir(out)?;
    let mut outputs = vec!["recovery_report.json".to_string()];
    write_json(&out.join("recovery_report.json"), &report)?;
    if cfg.gd.record_trajectory {
        create_dir(&out.join("trajectories"))?;
        for k in 0..training.n_gens {
            for j in 0..training.n_blocks {
                let rel = format!("trajectories/g{k}_b{j}.csv");
                let mut w = csv::Writer::from_path(out.join(&rel))?;
                w.write_record(["iteration", "c"])?;
                for (t, c) in result.trajectory[k][j].iter().enumerate() {
                    w.write_record([t.to_string(), c.to_string()])?;
                }
                w.flush()?;
                outputs.push(rel);
            }
        }
    }

    let mut manifest = RunManifest::new("recover", serde_json::to_value(&cfg)?, Vec::new());
    manifest.grid_name = Some(grid.name.clone());
    manifest.grid_hash = Some(grid.content_hash());
    manifest.input(&grid_path)?;
    manifest.input(&obs_path)?;
    if truth.is_some() {
        manifest.input(&truth_path)?;
    }
    manifest.write(out, &outputs)?;

    let r = report.recovery_rate;
    println!(
        "p = {}: {}/{} blocks recovered ({} non-free, {} never marginal), bound ε = {:.4}",
        report.p, r.recovered, r.total, r.non_free, r.never_marginal, report.bound_epsilon
    );
    if let Some(e) = report.mean_rel_error {
        println!("mean relative error against ground truth: {:.4}%", 100.0 * e);
    }
    Ok(())
}
