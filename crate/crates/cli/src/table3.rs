use std::path::Path;

use inverse_lmp::experiments::{run_robustness, RobustnessConfig, RobustnessResult};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::generate::{load_case, CostSource, GenerateConfig};
use crate::manifest::{create_dir, RunManifest};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Table3Config {
    pub robustness: RobustnessConfig,
    /// Each seed reseeds the dataset; the noise seed is `noise_seed_offset + seed`.
    pub seeds: Vec<u64>,
    pub noise_seed_offset: u64,
}

impl Default for Table3Config {
    fn default() -> Self {
        Table3Config {
            robustness: RobustnessConfig::default(),
            seeds: vec![1],
            noise_seed_offset: 1000,
        }
    }
}

#[derive(Serialize)]
struct Row<'a> {
    seed: String,
    setting: &'a str,
    frequency: f64,
    mu: f64,
    sigma: f64,
    n_valid: f64,
    truth: f64,
    corrupted_samples: f64,
    l1_hat: f64,
    l1_error: f64,
    l2_hat: f64,
    l2_error: f64,
}

#[derive(Serialize)]
struct PatternRow {
    seed: String,
    l1_within: usize,
    l2_increasing: usize,
    l2_dominates: usize,
    l1_beats_l2: usize,
    holds: usize,
}

pub fn run(config_path: Option<&Path>, seed: Option<u64>, seeds_file: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let mut cfg: Table3Config = config::load(config_path)?;
    if let Some(path) = seeds_file {
        cfg.seeds = config::read_seeds(path)?;
    }
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if cfg.seeds.is_empty() {
        return Err(crate::usage("no seeds to run"));
    }
    // the robustness study always runs on the built-in 14-bus case
    let case = GenerateConfig { costs: CostSource::Ieee14, dataset: cfg.robustness.dataset.clone(), ..GenerateConfig::default() };
    let (grid, baseline) = load_case(&case, None)?;

    let mut results: Vec<(u64, RobustnessResult)> = Vec::with_capacity(cfg.seeds.len());
    for &s in &cfg.seeds {
        let mut rc = cfg.robustness.clone();
        rc.dataset.seed = s;
        rc.noise_seed = cfg.noise_seed_offset + s;
        let r = run_robustness(&grid, &baseline, &rc)?;
        log::info!("seed {s}: pattern {:?}", r.pattern());
        results.push((s, r));
    }

    create_dir(out)?;
    let mut w = csv::Writer::from_path(out.join("table3.csv"))?;
    for (s, r) in &results {
        for row in &r.rows {
            w.serialize(Row {
                seed: s.to_string(),
                setting: &row.label,
                frequency: row.frequency,
                mu: row.mu,
                sigma: row.sigma,
                n_valid: r.n_valid as f64,
                truth: r.truth,
                corrupted_samples: row.corrupted_samples as f64,
                l1_hat: row.l1_hat,
                l1_error: row.l1_error,
                l2_hat: row.l2_hat,
                l2_error: row.l2_error,
            })?;
        }
    }
    // aggregate rows: means over seeds, setting by setting
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&RobustnessResult, usize) -> f64, i: usize| results.iter().map(|(_, r)| f(r, i)).sum::<f64>() / n;
    let first = &results[0].1;
    for (i, row) in first.rows.iter().enumerate() {
        w.serialize(Row {
            seed: "mean".into(),
            setting: &row.label,
            frequency: row.frequency,
            mu: row.mu,
            sigma: row.sigma,
            n_valid: mean(&|r, _| r.n_valid as f64, i),
            truth: mean(&|r, _| r.truth, i),
            corrupted_samples: mean(&|r, i| r.rows[i].corrupted_samples as f64, i),
            l1_hat: mean(&|r, i| r.rows[i].l1_hat, i),
            l1_error: mean(&|r, i| r.rows[i].l1_error, i),
            l2_hat: mean(&|r, i| r.rows[i].l2_hat, i),
            l2_error: mean(&|r, i| r.rows[i].l2_error, i),
        })?;
    }
    w.flush()?;

    let mut pw = csv::Writer::from_path(out.join("table3_pattern.csv"))?;
    let mut total = PatternRow { seed: "total".into(), l1_within: 0, l2_increasing: 0, l2_dominates: 0, l1_beats_l2: 0, holds: 0 };
    for (s, r) in &results {
        let p = r.pattern();
        let row = PatternRow {
            seed: s.to_string(),
            l1_within: p.l1_within.into(),
            l2_increasing: p.l2_increasing.into(),
            l2_dominates: p.l2_dominates.into(),
            l1_beats_l2: p.l1_beats_l2.into(),
            holds: p.holds().into(),
        };
        total.l1_within += row.l1_within;
        total.l2_increasing += row.l2_increasing;
        total.l2_dominates += row.l2_dominates;
        total.l1_beats_l2 += row.l1_beats_l2;
        total.holds += row.holds;
        pw.serialize(row)?;
    }
    pw.serialize(&total)?;
    pw.flush()?;

    let mut manifest = RunManifest::new("table3", serde_json::to_value(&cfg)?, cfg.seeds.clone());
    manifest.grid_name = Some(grid.name.clone());
    manifest.grid_hash = Some(grid.content_hash());
    manifest.write(out, &["table3.csv".into(), "table3_pattern.csv".into()])?;

    println!("{:<10} {:>10} {:>10} {:>10} {:>10}", "setting", "l1 hat", "l1 err %", "l2 hat", "l2 err %");
    for (i, row) in first.rows.iter().enumerate() {
        println!(
            "{:<10} {:>10.4} {:>10.3} {:>10.4} {:>10.3}",
            row.label,
            mean(&|r, i| r.rows[i].l1_hat, i),
            100.0 * mean(&|r, i| r.rows[i].l1_error, i),
            mean(&|r, i| r.rows[i].l2_hat, i),
            100.0 * mean(&|r, i| r.rows[i].l2_error, i),
        );
    }
    println!("pattern holds on {}/{} seeds", total.holds, results.len());
    Ok(())
}
