use std::path::Path;

use inverse_lmp::experiments::{histogram, run_mismatch, MismatchConfig};
use inverse_lmp::grid::synthetic_grid;
use inverse_lmp::inverse::RecoveryRate;
use inverse_lmp::scuc::BindingStats;
use serde::{Deserialize, Serialize};

use crate::manifest::{create_dir, write_json, RunManifest};
use crate::plot::{histogram_svg, Series};
use crate::{config, usage, Infeasible};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramConfig {
    pub bins: usize,
    /// Relative errors are binned over `[-range, range]`; outliers land in
    /// the end bins.
    pub range: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig { bins: 40, range: 0.2 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MismatchCliConfig {
    pub experiment: MismatchConfig,
    pub histogram: HistogramConfig,
}

#[derive(Serialize)]
struct Summary {
    n_observations: usize,
    skipped_horizons: usize,
    binding: BindingStats,
    binding_fractions: [f64; 4],
    only_ramp_rarest: bool,
    recovery_rate: RecoveryRate,
    settings: Vec<SettingSummary>,
    branch_and_bound_nodes: usize,
}

#[derive(Serialize)]
struct SettingSummary {
    label: String,
    mean_rel_error_l1: f64,
    mean_rel_error_l2: f64,
    mean_sample_error: f64,
    n_samples: usize,
}

pub fn run(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let mut cfg: MismatchCliConfig = config::load(config_path)?;
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    let e = &cfg.experiment;
    if e.n_horizons == 0 || e.hours < 2 {
        return Err(usage(format!(
            "need at least one horizon of at least 2 hours, got {} × {}",
            e.n_horizons, e.hours
        )));
    }
    if cfg.histogram.bins == 0 || !(cfg.histogram.range > 0.0) {
        return Err(usage("histogram needs bins ≥ 1 and range > 0"));
    }
    let result = run_mismatch(e)?;
    if result.n_observations == 0 {
        let reason = result.skipped.first().map(|s| s.reason.as_str()).unwrap_or("no observations");
        return Err(Infeasible(format!("all {} horizons were infeasible (first: {reason})", e.n_horizons)).into());
    }
    let grid = synthetic_grid(&e.grid)?;

    create_dir(out)?;
    let s = &result.stats;
    let f = s.fractions();
    let mut w = csv::Writer::from_path(out.join("binding_stats.csv"))?;
    w.write_record(["category", "count", "fraction"])?;
    for (name, count, frac) in [
        ("only_power", s.only_power, f[0]),
        ("only_ramp", s.only_ramp, f[1]),
        ("both", s.both, f[2]),
        ("neither", s.neither, f[3]),
    ] {
        w.write_record([name.to_string(), count.to_string(), frac.to_string()])?;
    }
    w.flush()?;

    let (lo, hi) = (-cfg.histogram.range, cfg.histogram.range);
    let mut hw = csv::Writer::from_path(out.join("errors_hist.csv"))?;
    hw.write_record(["series", "bin_lo", "bin_hi", "count"])?;
    let mut series = Vec::new();
    for m in &result.settings {
        let bins = histogram(&m.sample_errors, cfg.histogram.bins, lo, hi);
        for &(a, b, c) in &bins {
            hw.write_record([m.label.clone(), a.to_string(), b.to_string(), c.to_string()])?;
        }
        series.push(Series {
            name: m.label.clone(),
            points: bins.iter().map(|&(a, b, c)| (0.5 * (a + b), c as f64)).collect(),
        });
    }
    hw.flush()?;
    let svg = histogram_svg("Relative error of recovered prices", "relative error", "samples", &series, (lo, hi));
    std::fs::write(out.join("errors_hist.svg"), svg)?;

    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let summary = Summary {
        n_observations: result.n_observations,
        skipped_horizons: result.skipped.len(),
        binding: *s,
        binding_fractions: f,
        only_ramp_rarest: result.only_ramp_rarest(),
        recovery_rate: result.recovery,
        settings: result
            .settings
            .iter()
            .map(|m| SettingSummary {
                label: m.label.clone(),
                mean_rel_error_l1: m.mean_rel_error_l1,
                mean_rel_error_l2: m.mean_rel_error_l2,
                mean_sample_error: mean(&m.sample_errors),
                n_samples: m.sample_errors.len(),
            })
            .collect(),
        branch_and_bound_nodes: result.nodes,
    };
    write_json(&out.join("mismatch_report.json"), &summary)?;

    let mut manifest = RunManifest::new("mismatch", serde_json::to_value(&cfg)?, vec![e.seed, e.cost_seed, e.noise_seed]);
    manifest.grid_name = Some(grid.name.clone());
    manifest.grid_hash = Some(grid.content_hash());
    manifest.write(
        out,
        &["binding_stats.csv".into(), "errors_hist.csv".into(), "errors_hist.svg".into(), "mismatch_report.json".into()],
    )?;

    println!(
        "{} observations: only power {} / only ramp {} / both {} / neither {}",
        result.n_observations, s.only_power, s.only_ramp, s.both, s.neither
    );
    for m in &summary.settings {
        println!(
            "{:<10} mean rel error ℓ1 {:.3}%  ℓ2 {:.3}%",
            m.label,
            100.0 * m.mean_rel_error_l1,
            100.0 * m.mean_rel_error_l2
        );
    }
    let r = result.recovery;
    println!(
        "recovery rate {:.2}% ({} recovered + {} non-free + {} never marginal = {})",
        100.0 * r.rate(),
        r.recovered,
        r.non_free,
        r.never_marginal,
        r.total
    );
    Ok(())
}
