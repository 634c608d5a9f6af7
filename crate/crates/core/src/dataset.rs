//! Market observations, synthetic datasets and price-noise injection.
//!
//! An observation holds only what a market operator publishes: commitment,
//! schedules, prices, net load and which limits bind. Sampled offers are kept
//! in a separate ground-truth document.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::{info, warn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_error, ScenarioError};
use crate::grid::Grid;
use crate::inverse::identify_free_generators;
use crate::market::{clear_uc, solve_dcopf, DispatchResult};
use crate::scenario::{sample_offers, sweep_load, LoadSweep, OfferCurve};
use lp_kernel::BINDING_TOL;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BindingMasks {
    /// Committed and at `x_max`.
    pub gen_max: Vec<bool>,
    /// Committed and at `x_min`.
    pub gen_min: Vec<bool>,
    pub line_max: Vec<bool>,
    pub line_min: Vec<bool>,
    /// Present for multi-period clearings: any ramp row touching this hour binds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<Vec<bool>>,
    /// Present for reserve clearings: `x + r⁺ ≤ x_max` or `x − r⁻ ≥ x_min` binds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_limit: Option<Vec<bool>>,
}

/// One published clearing outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketObservation {
    pub id: usize,
    pub hour: usize,
    pub u: Vec<bool>,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub omega: Vec<f64>,
    pub e: Vec<f64>,
    pub binding_masks: BindingMasks,
}

impl MarketObservation {
    pub fn from_dispatch(id: usize, hour: usize, grid: &Grid, load: &[f64], d: &DispatchResult) -> Self {
        let gen_max = (0..grid.n_gens())
            .map(|k| d.u[k] && d.x[k] >= grid.gen_max[k] - BINDING_TOL)
            .collect();
        let gen_min = (0..grid.n_gens())
            .map(|k| d.u[k] && d.x[k] <= grid.gen_min[k] + BINDING_TOL)
            .collect();
        let reserve_limit = d.reserves.as_ref().map(|r| {
            r.upper_binding
                .iter()
                .zip(&r.lower_binding)
                .map(|(a, b)| *a || *b)
                .collect()
        });
        MarketObservation {
            id,
            hour,
            u: d.u.clone(),
            x: d.x.clone(),
            lambda: d.lambda,
            omega: d.omega.clone(),
            e: load.to_vec(),
            binding_masks: BindingMasks {
                gen_max,
                gen_min,
                line_max: d.line_upper_binding(grid),
                line_min: d.line_lower_binding(grid),
                ramp: None,
                reserve_limit,
            },
        }
    }
}

pub fn write_observations(path: &Path, obs: &[MarketObservation]) -> Result<(), ScenarioError> {
    let mut f = fs::File::create(path).map_err(|e| io_error(path, e))?;
    for o in obs {
        let line = serde_json::to_string(o)?;
        writeln!(f, "{line}").map_err(|e| io_error(path, e))?;
    }
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<Vec<MarketObservation>, ScenarioError> {
    let f = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Offers actually used by the market in each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub format_version: u32,
    pub n_blocks: usize,
    pub baseline: Vec<OfferCurve>,
    /// `offers[i]` belongs to the observation with id `i`.
    pub offers: Vec<Vec<OfferCurve>>,
}

impl GroundTruth {
    /// True offer price of generator `k`, block `j` in observation `id`.
    pub fn price(&self, id: usize, k: usize, j: usize) -> f64 {
        self.offers[id][k].prices[j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_scenarios: usize,
    pub n_blocks: usize,
    /// Standard deviation of per-scenario offer fluctuation, $/MWh.
    pub sigma: f64,
    pub sweep: LoadSweep,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_scenarios: 200,
            n_blocks: 5,
            sigma: 2.0,
            sweep: LoadSweep::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedScenario {
    pub scenario: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub observations: Vec<MarketObservation>,
    pub ground_truth: GroundTruth,
    pub skipped: Vec<SkippedScenario>,
    /// `marginal_counts[k][j]`: observations in which block `j` of generator
    /// `k` was free.
    pub marginal_counts: Vec<Vec<usize>>,
}

impl Dataset {
    /// True when every generator has been free at least once in every block.
    pub fn covers_every_block(&self) -> bool {
        self.marginal_counts.iter().flatten().all(|&c| c > 0)
    }
}

/// RNG for scenario `index`: the dataset seed picks the key and the scenario
/// index picks the ChaCha stream, so scenarios never share a stream.
pub fn scenario_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Clears `cfg.n_scenarios` independent hours with sampled offers and swept
/// loads. Infeasible scenarios are skipped and logged; observation ids are
/// consecutive over the kept scenarios.
pub fn generate_dataset(
    grid: &Grid,
    baseline: &[OfferCurve],
    cfg: &DatasetConfig,
) -> Result<Dataset, ScenarioError> {
    if baseline.len() != grid.n_gens() {
        return Err(ScenarioError::Config(format!(
            "{} baselines for {} generators",
            baseline.len(),
            grid.n_gens()
        )));
    }
    if baseline.iter().any(|b| b.n_blocks() != cfg.n_blocks) {
        return Err(ScenarioError::Config("baseline block count differs from n_blocks".into()));
    }
    let mut observations = Vec::with_capacity(cfg.n_scenarios);
    let mut truth = Vec::with_capacity(cfg.n_scenarios);
    let mut skipped = Vec::new();
    let mut counts = vec![vec![0usize; cfg.n_blocks]; grid.n_gens()];
    for s in 0..cfg.n_scenarios {
        let mut rng = scenario_rng(cfg.seed, s);
        let offers = sample_offers(baseline, cfg.sigma, &mut rng)?;
        let load = sweep_load(grid, &cfg.sweep, s, cfg.n_scenarios, &mut rng);
        let cleared = clear_uc(grid, &offers, &load)
            .and_then(|c| solve_dcopf(grid, &offers, &load, &c.u));
        let d = match cleared {
            Ok(d) => d,
            Err(e) => {
                warn!("scenario {s} skipped: {e}");
                skipped.push(SkippedScenario {
                    scenario: s,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let obs = MarketObservation::from_dispatch(observations.len(), s, grid, &load, &d);
        let free = identify_free_generators(&obs, grid, cfg.n_blocks, BINDING_TOL);
        for (k, row) in free.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                if f {
                    counts[k][j] += 1;
                }
            }
        }
        observations.push(obs);
        truth.push(offers);
    }
    info!(
        "generated {} observations ({} skipped)",
        observations.len(),
        skipped.len()
    );
    Ok(Dataset {
        observations,
        ground_truth: GroundTruth {
            format_version: DATASET_FORMAT_VERSION,
            n_blocks: cfg.n_blocks,
            baseline: baseline.to_vec(),
            offers: truth,
        },
        skipped,
        marginal_counts: counts,
    })
}

/// How noise entries are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseGranularity {
    /// Each (observation, bus) price is corrupted independently.
    PerEntry,
    /// Each observation is corrupted as a whole (every bus price).
    PerObservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    OfferFluctuation,
    LmpError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub mu: f64,
    pub sigma: f64,
    pub frequency: f64,
    pub granularity: NoiseGranularity,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn lmp_error(mu: f64, sigma: f64, frequency: f64, seed: u64) -> Self {
        NoiseSpec {
            mode: NoiseMode::LmpError,
            mu,
            sigma,
            frequency,
            granularity: NoiseGranularity::PerEntry,
            seed,
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(0.0..=1.0).contains(&self.frequency) {
            return Err(ScenarioError::Config(format!(
                "noise frequency {} outside [0, 1]",
                self.frequency
            )));
        }
        if !(self.sigma >= 0.0) || !self.mu.is_finite() {
            return Err(ScenarioError::Config("noise needs sigma ≥ 0 and finite mu".into()));
        }
        if self.mode != NoiseMode::LmpError {
            return Err(ScenarioError::Config("price noise needs mode lmp_error".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub observation: usize,
    pub bus: usize,
    pub delta: f64,
}

/// Adds `N(μ, σ²)` errors to a `frequency` share of published prices.
///
/// Every entry (or observation) consumes the same random numbers regardless
/// of `frequency`, `μ` and `σ`: a uniform `U` that selects the entry when
/// `U < frequency` and a standard normal `z` giving `delta = μ + σ·z`. The
/// corrupted set therefore grows monotonically with `frequency` for a fixed
/// seed. `λ` follows the price of the reference bus.
pub fn inject_lmp_noise(
    grid: &Grid,
    observations: &[MarketObservation],
    spec: &NoiseSpec,
) -> Result<(Vec<MarketObservation>, Vec<Corruption>), ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = observations.to_vec();
    let mut log = Vec::new();
    for obs in out.iter_mut() {
        let obs_pick: f64 = rng.gen();
        for b in 0..obs.omega.len() {
            let u: f64 = rng.gen();
            let z: f64 = rng.sample(StandardNormal);
            let selected = match spec.granularity {
                NoiseGranularity::PerEntry => u < spec.frequency,
                NoiseGranularity::PerObservation => obs_pick < spec.frequency,
            };
            if selected {
                let delta = spec.mu + spec.sigma * z;
                obs.omega[b] += delta;
                log.push(Corruption {
                    observation: obs.id,
                    bus: b,
                    delta,
                });
            }
        }
        obs.lambda = obs.omega[grid.reference_bus];
    }
    Ok((out, log))
}

/// Per-run provenance written next to every dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub git_describe: String,
    pub grid_name: String,
    pub grid_hash: String,
    pub config: serde_json::Value,
    pub n_observations: usize,
    pub skipped: Vec<SkippedScenario>,
    pub marginal_counts: Vec<Vec<usize>>,
    /// SHA-256 of each written file, by file name.
    pub files: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `observations.jsonl`, `ground_truth.json` and `manifest.json`.
pub fn write_dataset(
    dir: &Path,
    grid: &Grid,
    dataset: &Dataset,
    config: serde_json::Value,
    git_describe: &str,
) -> Result<Manifest, ScenarioError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let obs_path = dir.join("observations.jsonl");
    write_observations(&obs_path, &dataset.observations)?;
    let truth_path = dir.join("ground_truth.json");
    let truth = serde_json::to_string_pretty(&dataset.ground_truth)? + "\n";
    fs::write(&truth_path, &truth).map_err(|e| io_error(&truth_path, e))?;
    let mut files = Vec::new();
    for p in [&obs_path, &truth_path] {
        let bytes = fs::read(p).map_err(|e| io_error(p, e))?;
        let name = p.file_name().expect("file name").to_string_lossy().into_owned();
        files.push((name, sha256_hex(&bytes)));
    }
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        git_describe: git_describe.to_string(),
        grid_name: grid.name.clone(),
        grid_hash: grid.content_hash(),
        config,
        n_observations: dataset.observations.len(),
        skipped: dataset.skipped.clone(),
        marginal_counts: dataset.marginal_counts.clone(),
        files,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(|e| io_error(&path, e))?;
    Ok(manifest)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
