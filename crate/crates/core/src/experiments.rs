//! End-to-end experiments: convergence of the two loss norms, robustness to
//! corrupted prices, and recovery under a richer clearing model than the one
//! the inverse method assumes.

use log::{info, warn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    generate_dataset, inject_lmp_noise, DatasetConfig, GroundTruth, MarketObservation,
    NoiseGranularity, NoiseMode, NoiseSpec, SkippedScenario,
};
use crate::error::ExperimentError;
use crate::grid::{synthetic_grid, Grid, SyntheticGridSpec};
use crate::inverse::{
    error_bound, gd_recover, median_interval, training_set_from_observations, BlockReport, GdConfig,
    GdResult, InitRule, LearningRate, RecoveryRate, TrainingSet,
};
use crate::market::ReserveConfig;
use crate::scenario::{
    baselines_for, random_costs, sample_offers, LoadSweep, OfferCurve, DEFAULT_PRICE_SCALE,
    IEEE14_COSTS,
};
use crate::scuc::{clear_scuc_ramping, BindingStats, RampConfig, ScucOptions};
use lp_kernel::BINDING_TOL;

/// Offer baselines of the 14-bus study case with the default price scale.
pub fn ieee14_baseline(grid: &Grid, n_blocks: usize) -> Result<Vec<OfferCurve>, ExperimentError> {
    let costs: Vec<_> = IEEE14_COSTS
        .iter()
        .map(|c| c.scale_energy(DEFAULT_PRICE_SCALE))
        .collect();
    Ok(baselines_for(grid, &costs, n_blocks)?)
}

/// Offer baselines built from random quadratic cost curves, for grids that
/// have no reference cost data.
pub fn random_baseline(grid: &Grid, cost_seed: u64, n_blocks: usize) -> Result<Vec<OfferCurve>, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cost_seed);
    let costs = random_costs(grid, &mut rng);
    Ok(baselines_for(grid, &costs, n_blocks)?)
}

/// Mean ground-truth price of block `(k, j)` over the observations that
/// contributed a sample for it.
pub fn sample_truth(training: &TrainingSet, truth: &GroundTruth, k: usize, j: usize) -> Option<f64> {
    let ids = &training.sources[k][j];
    if ids.is_empty() {
        return None;
    }
    Some(ids.iter().map(|&id| truth.price(id, k, j)).sum::<f64>() / ids.len() as f64)
}

fn rel_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs().max(f64::MIN_POSITIVE)
}

/// Per-block rows of a recovery report. `bound_epsilon` is the single-block
/// bound `p c̄^p/√T`.
pub fn recovery_report(
    training: &TrainingSet,
    cfg: &GdConfig,
    result: &GdResult,
    truth: Option<&GroundTruth>,
) -> Vec<BlockReport> {
    let mut rows = Vec::with_capacity(training.n_gens * training.n_blocks);
    let eps = error_bound(1, cfg.p, cfg.c_bar, cfg.iterations);
    for k in 0..training.n_gens {
        for j in 0..training.n_blocks {
            let t = truth.and_then(|g| sample_truth(training, g, k, j));
            rows.push(BlockReport {
                generator: k,
                block: j,
                n_valid: training.count(k, j),
                c_hat: result.c_hat[k][j],
                c_avg: result.c_avg[k][j],
                truth: t,
                rel_error: t.map(|t| rel_error(result.c_hat[k][j], t)),
                bound_epsilon: eps,
            });
        }
    }
    rows
}

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into
/// the end bins. Returns `(bin_lo, bin_hi, count)`.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = if w > 0.0 { ((v - lo) / w).floor() } else { 0.0 };
        counts[(i.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + w * i as f64, lo + w * (i + 1) as f64, c))
        .collect()
}

/// First iteration after which the trajectory stays within `tol` of the
/// interval `[lo, hi]`.
pub fn iterations_to_within(trajectory: &[f64], lo: f64, hi: f64, tol: f64) -> Option<usize> {
    let outside = |c: f64| c < lo - tol || c > hi + tol;
    match trajectory.iter().rposition(|&c| outside(c)) {
        None => Some(0),
        Some(i) if i + 1 < trajectory.len() => Some(i + 1),
        Some(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub dataset: DatasetConfig,
    pub generator: usize,
    pub init: Vec<f64>,
    /// Step size shared by both norms.
    pub eta: f64,
    pub iterations: usize,
    /// Relative distance to the loss minimizer that counts as converged.
    pub tolerance: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            dataset: DatasetConfig::default(),
            generator: 0,
            init: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            eta: 0.2,
            iterations: 2000,
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceBlock {
    pub block: usize,
    pub n_valid: usize,
    /// Mean of the block's true offers over its valid observations; also the
    /// minimizer of the squared loss.
    pub truth: Option<f64>,
    /// Minimizers of the absolute loss.
    pub median_interval: Option<(f64, f64)>,
    pub l1_final: f64,
    pub l2_final: f64,
    pub l1_iterations: Option<usize>,
    pub l2_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub generator: usize,
    pub blocks: Vec<ConvergenceBlock>,
    /// Trajectories `[block][iteration]`.
    pub l1: Vec<Vec<f64>>,
    pub l2: Vec<Vec<f64>>,
    pub covers_every_block: bool,
}

impl ConvergenceResult {
    /// Blocks on which the squared loss reached the tolerance strictly sooner.
    pub fn l2_faster_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| match (b.l2_iterations, b.l1_iterations) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            })
            .count()
    }

    pub fn all_converged(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.l1_iterations.is_some() && b.l2_iterations.is_some())
    }
}

/// Recovers one generator's block prices with both norms from a noise-free
/// dataset and measures how fast each trajectory settles.
///
/// Each norm is measured against its own loss minimizer: the sample mean
/// for the squared loss and the median interval for the absolute loss. The
/// tolerance is relative to the sample mean in both cases.
pub fn run_convergence(
    grid: &Grid,
    baseline: &[OfferCurve],
    cfg: &ConvergenceConfig,
) -> Result<ConvergenceResult, ExperimentError> {
    if cfg.generator >= grid.n_gens() {
        return Err(ExperimentError::Config(format!(
            "generator {} out of range",
            cfg.generator
        )));
    }
    let ds = generate_dataset(grid, baseline, &cfg.dataset)?;
    let n_blocks = cfg.dataset.n_blocks;
    let (_, training) =
        training_set_from_observations(&ds.observations, grid, n_blocks, BINDING_TOL)?;
    let k = cfg.generator;
    let mut runs = Vec::new();
    for p in [1.0, 2.0] {
        let gd = GdConfig {
            p,
            iterations: cfg.iterations,
            eta: LearningRate::Fixed(cfg.eta),
            c_bar: 200.0,
            bounds: None,
            init: InitRule::PerBlock(cfg.init.clone()),
            record_trajectory: true,
        };
        let single = TrainingSet {
            n_gens: 1,
            n_blocks,
            data: vec![training.data[k].clone()],
            sources: vec![training.sources[k].clone()],
        };
        runs.push(gd_recover(&single, &gd)?);
    }
    let (r1, r2) = (&runs[0], &runs[1]);
    let mut blocks = Vec::with_capacity(n_blocks);
    for j in 0..n_blocks {
        let truth = sample_truth(&training, &ds.ground_truth, k, j);
        let med = median_interval(&training.data[k][j]);
        let mean = crate::inverse::closed_form_l2(&training)[k][j];
        let (l1_it, l2_it) = match (truth, med, mean) {
            (Some(t), Some((lo, hi)), Some(m)) => {
                let tol = cfg.tolerance * t.abs();
                (
                    iterations_to_within(&r1.trajectory[0][j], lo, hi, tol),
                    iterations_to_within(&r2.trajectory[0][j], m, m, tol),
                )
            }
            _ => (None, None),
        };
        blocks.push(ConvergenceBlock {
            block: j,
            n_valid: training.count(k, j),
            truth,
            median_interval: med,
            l1_final: r1.c_hat[0][j],
            l2_final: r2.c_hat[0][j],
            l1_iterations: l1_it,
            l2_iterations: l2_it,
        });
    }
    Ok(ConvergenceResult {
        generator: k,
        blocks,
        l1: r1.trajectory[0].clone(),
        l2: r2.trajectory[0].clone(),
        covers_every_block: ds.covers_every_block(),
    })
}

/// One price-corruption setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSetting {
    pub label: String,
    pub frequency: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl NoiseSetting {
    pub fn new(label: &str, frequency: f64, mu: f64, sigma: f64) -> Self {
        NoiseSetting {
            label: label.to_string(),
            frequency,
            mu,
            sigma,
        }
    }

    pub fn spec(&self, granularity: NoiseGranularity, seed: u64) -> NoiseSpec {
        NoiseSpec {
            mode: NoiseMode::LmpError,
            mu: self.mu,
            sigma: self.sigma,
            frequency: self.frequency,
            granularity,
            seed,
        }
    }
}

/// 1% / 5% frequency × N(50, 5²) / N(100, 10²), in increasing severity.
pub fn standard_noise_settings() -> Vec<NoiseSetting> {
    vec![
        NoiseSetting::new("1% small", 0.01, 50.0, 5.0),
        NoiseSetting::new("1% large", 0.01, 100.0, 10.0),
        NoiseSetting::new("5% small", 0.05, 50.0, 5.0),
        NoiseSetting::new("5% large", 0.05, 100.0, 10.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub dataset: DatasetConfig,
    /// `(generator, block)` to recover; `None` picks the block with the most
    /// valid samples.
    pub target: Option<(usize, usize)>,
    pub settings: Vec<NoiseSetting>,
    pub granularity: NoiseGranularity,
    pub noise_seed: u64,
    pub iterations: usize,
    pub eta_l1: f64,
    pub eta_l2: f64,
    pub init: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            dataset: DatasetConfig {
                n_scenarios: 1500,
                sweep: LoadSweep {
                    low: 0.10,
                    high: 0.18,
                    jitter: 0.2,
                },
                ..DatasetConfig::default()
            },
            target: Some((2, 0)),
            settings: standard_noise_settings(),
            granularity: NoiseGranularity::PerEntry,
            noise_seed: 7,
            iterations: 5000,
            eta_l1: 0.01,
            eta_l2: 0.2,
            init: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub label: String,
    pub frequency: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Valid samples of the target block that received an error.
    pub corrupted_samples: usize,
    pub l1_hat: f64,
    pub l1_error: f64,
    pub l2_hat: f64,
    pub l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessResult {
    pub generator: usize,
    pub block: usize,
    pub n_valid: usize,
    pub truth: f64,
    /// Absolute-loss estimate and error on the clean prices.
    pub clean_l1_hat: f64,
    pub clean_l1_error: f64,
    pub rows: Vec<RobustnessRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustnessPattern {
    /// Absolute-loss error ≤ 1% in every setting.
    pub l1_within: bool,
    /// Squared-loss error strictly increasing across the settings.
    pub l2_increasing: bool,
    /// Squared-loss error in the last setting ≥ 5× the absolute-loss error.
    pub l2_dominates: bool,
    /// Absolute-loss error below squared-loss error in the last setting.
    pub l1_beats_l2: bool,
}

impl RobustnessPattern {
    pub fn holds(&self) -> bool {
        self.l1_within && self.l2_increasing && self.l2_dominates
    }
}

impl RobustnessResult {
    pub fn pattern(&self) -> RobustnessPattern {
        let last = self.rows.last();
        RobustnessPattern {
            l1_within: self.rows.iter().all(|r| r.l1_error <= 0.01),
            l2_increasing: self.rows.windows(2).all(|w| w[1].l2_error > w[0].l2_error),
            l2_dominates: last.map_or(false, |r| r.l2_error >= 5.0 * r.l1_error),
            l1_beats_l2: last.map_or(false, |r| r.l1_error < r.l2_error),
        }
    }
}

fn recover_block(samples: Vec<f64>, p: f64, eta: f64, iterations: usize, init: f64) -> Result<f64, ExperimentError> {
    let gd = GdConfig {
        p,
        iterations,
        eta: LearningRate::Fixed(eta),
        c_bar: 200.0,
        bounds: None,
        init: InitRule::Constant(init),
        record_trajectory: false,
    };
    Ok(gd_recover(&TrainingSet::single(samples), &gd)?.c_hat[0][0])
}

/// Recovers one block price from prices corrupted by each noise setting in
/// turn. Noise draws are shared across settings (see
/// [`inject_lmp_noise`]), so a larger setting corrupts a superset of the
/// entries of a smaller one.
pub fn run_robustness(
    grid: &Grid,
    baseline: &[OfferCurve],
    cfg: &RobustnessConfig,
) -> Result<RobustnessResult, ExperimentError> {
    let ds = generate_dataset(grid, baseline, &cfg.dataset)?;
    let n_blocks = cfg.dataset.n_blocks;
    let (_, training) =
        training_set_from_observations(&ds.observations, grid, n_blocks, BINDING_TOL)?;
    let (k, j) = match cfg.target {
        Some((k, j)) if k < grid.n_gens() && j < n_blocks => (k, j),
        Some(t) => return Err(ExperimentError::Config(format!("target {t:?} out of range"))),
        None => {
            let mut best = (0, 0);
            for k in 0..grid.n_gens() {
                for j in 0..n_blocks {
                    if training.count(k, j) > training.count(best.0, best.1) {
                        best = (k, j);
                    }
                }
            }
            best
        }
    };
    let truth = sample_truth(&training, &ds.ground_truth, k, j).ok_or_else(|| {
        ExperimentError::Config(format!("generator {k} block {j} is never free in the dataset"))
    })?;
    let ids = training.sources[k][j].clone();
    let clean_l1 = recover_block(training.data[k][j].clone(), 1.0, cfg.eta_l1, cfg.iterations, cfg.init)?;
    let mut rows = Vec::with_capacity(cfg.settings.len());
    for s in &cfg.settings {
        let spec = s.spec(cfg.granularity, cfg.noise_seed);
        let (noisy, log) = inject_lmp_noise(grid, &ds.observations, &spec)?;
        let bus = grid.gen_bus[k];
        let corrupted = log
            .iter()
            .filter(|c| c.bus == bus && ids.binary_search(&c.observation).is_ok())
            .count();
        // masks depend on schedules only, so the valid set is unchanged
        let samples: Vec<f64> = ids.iter().map(|&id| noisy[id].omega[bus]).collect();
        let l1 = recover_block(samples.clone(), 1.0, cfg.eta_l1, cfg.iterations, cfg.init)?;
        let l2 = recover_block(samples, 2.0, cfg.eta_l2, cfg.iterations, cfg.init)?;
        rows.push(RobustnessRow {
            label: s.label.clone(),
            frequency: s.frequency,
            mu: s.mu,
            sigma: s.sigma,
            corrupted_samples: corrupted,
            l1_hat: l1,
            l1_error: rel_error(l1, truth),
            l2_hat: l2,
            l2_error: rel_error(l2, truth),
        });
    }
    Ok(RobustnessResult {
        generator: k,
        block: j,
        n_valid: ids.len(),
        truth,
        clean_l1_hat: clean_l1,
        clean_l1_error: rel_error(clean_l1, truth),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MismatchConfig {
    pub grid: SyntheticGridSpec,
    /// Seed of the random cost curves.
    pub cost_seed: u64,
    pub n_horizons: usize,
    pub hours: usize,
    pub n_blocks: usize,
    /// Offer fluctuation per horizon, $/MWh.
    pub sigma: f64,
    /// Reserve requirements as fractions of the horizon's peak load.
    pub reserve_up: f64,
    pub reserve_down: f64,
    pub reserve_price: f64,
    /// Ramp rates as a fraction of capacity per hour.
    pub ramp_fraction: f64,
    /// Horizon load level as a multiple of the base load.
    pub load_low: f64,
    pub load_high: f64,
    /// Relative amplitude of the daily load cycle.
    pub daily_swing: f64,
    pub jitter: f64,
    /// Price-corruption settings run in addition to the clean data.
    pub noise: Vec<NoiseSetting>,
    pub noise_seed: u64,
    pub iterations: usize,
    pub eta_l1: f64,
    pub eta_l2: f64,
    pub init: f64,
    pub scuc: ScucOptions,
    pub seed: u64,
}

impl Default for MismatchConfig {
    fn default() -> Self {
        MismatchConfig {
            grid: SyntheticGridSpec::default(),
            cost_seed: 5,
            n_horizons: 20,
            hours: 3,
            n_blocks: 5,
            sigma: 2.0,
            reserve_up: 0.05,
            reserve_down: 0.03,
            reserve_price: 0.5,
            ramp_fraction: 0.5,
            load_low: 0.6,
            load_high: 1.3,
            daily_swing: 0.3,
            jitter: 0.1,
            noise: vec![
                NoiseSetting::new("1% small", 0.01, 50.0, 5.0),
                NoiseSetting::new("1% large", 0.01, 100.0, 10.0),
            ],
            noise_seed: 7,
            iterations: 5000,
            eta_l1: 0.05,
            eta_l2: 0.2,
            init: 30.0,
            scuc: ScucOptions::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchSetting {
    pub label: String,
    /// Mean relative error of the recovered block prices.
    pub mean_rel_error_l1: f64,
    pub mean_rel_error_l2: f64,
    /// Relative error of every individual recovered sample.
    pub sample_errors: Vec<f64>,
    pub blocks: Vec<BlockReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchResult {
    pub stats: BindingStats,
    pub n_observations: usize,
    pub skipped: Vec<SkippedScenario>,
    pub recovery: RecoveryRate,
    /// Clean prices first, then each noise setting.
    pub settings: Vec<MismatchSetting>,
    pub nodes: usize,
}

impl MismatchResult {
    /// Whether "only ramp binding" is strictly the least frequent category.
    pub fn only_ramp_rarest(&self) -> bool {
        let s = &self.stats;
        s.only_ramp < s.only_power && s.only_ramp < s.both && s.only_ramp < s.neither
    }
}

/// Load for hour `t` of horizon `h`: jittered base load scaled by the
/// horizon level and a daily cycle starting at a random hour.
fn horizon_profile<R: Rng>(grid: &Grid, cfg: &MismatchConfig, rng: &mut R) -> Vec<Vec<f64>> {
    let level = rng.gen_range(cfg.load_low..=cfg.load_high);
    let start: f64 = rng.gen_range(0.0..24.0);
    let shape: Vec<f64> = grid
        .base_load
        .iter()
        .map(|b| b * rng.gen_range(1.0 - cfg.jitter..=1.0 + cfg.jitter))
        .collect();
    (0..cfg.hours)
        .map(|t| {
            let phase = (start + t as f64) / 24.0 * std::f64::consts::TAU;
            let f = level * (1.0 + cfg.daily_swing * phase.sin());
            shape.iter().map(|s| s * f).collect()
        })
        .collect()
}

/// Generates hourly observations with the reserve and ramping clearing on a
/// synthetic grid, then recovers offers with the plain single-hour inverse.
pub fn run_mismatch(cfg: &MismatchConfig) -> Result<MismatchResult, ExperimentError> {
    if cfg.hours < 2 {
        return Err(ExperimentError::Config(format!(
            "horizon needs at least 2 hours, got {}",
            cfg.hours
        )));
    }
    if !(cfg.load_low > 0.0 && cfg.load_low <= cfg.load_high) {
        return Err(ExperimentError::Config("need 0 < load_low ≤ load_high".into()));
    }
    let grid = synthetic_grid(&cfg.grid)?;
    let baseline = random_baseline(&grid, cfg.cost_seed, cfg.n_blocks)?;
    let ramp = RampConfig::fraction_of_capacity(&grid, cfg.ramp_fraction);

    let mut observations: Vec<MarketObservation> = Vec::new();
    let mut truth = Vec::new();
    let mut skipped = Vec::new();
    let mut stats = BindingStats::default();
    let mut nodes = 0;
    for h in 0..cfg.n_horizons {
        let mut rng = crate::dataset::scenario_rng(cfg.seed, h);
        let offers = sample_offers(&baseline, cfg.sigma, &mut rng)?;
        let profile = horizon_profile(&grid, cfg, &mut rng);
        let peak = profile
            .iter()
            .map(|e| e.iter().sum::<f64>())
            .fold(0.0, f64::max);
        let reserve = ReserveConfig {
            r_plus: cfg.reserve_up * peak,
            r_minus: cfg.reserve_down * peak,
            price: cfg.reserve_price,
        };
        let res = match clear_scuc_ramping(&grid, &offers, &profile, &reserve, &ramp, &cfg.scuc) {
            Ok(r) => r,
            Err(e) => {
                warn!("horizon {h} skipped: {e}");
                skipped.push(SkippedScenario {
                    scenario: h,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        stats.merge(&res.stats);
        nodes += res.nodes;
        for (t, d) in res.hours.iter().enumerate() {
            let mut obs =
                MarketObservation::from_dispatch(observations.len(), h * cfg.hours + t, &grid, &profile[t], d);
            obs.binding_masks.ramp = Some(res.ramp_binding[t].clone());
            observations.push(obs);
            truth.push(offers.clone());
        }
    }
    info!(
        "mismatch data: {} observations, {} horizons skipped, binding {:?}",
        observations.len(),
        skipped.len(),
        stats
    );
    let ground_truth = GroundTruth {
        format_version: crate::dataset::DATASET_FORMAT_VERSION,
        n_blocks: cfg.n_blocks,
        baseline: baseline.clone(),
        offers: truth,
    };

    let mut variants: Vec<(String, Vec<MarketObservation>)> = vec![("clean".into(), observations.clone())];
    for s in &cfg.noise {
        let (noisy, _) = inject_lmp_noise(&grid, &observations, &s.spec(NoiseGranularity::PerEntry, cfg.noise_seed))?;
        variants.push((s.label.clone(), noisy));
    }
    let mut settings = Vec::with_capacity(variants.len());
    let mut recovery = None;
    for (label, obs) in variants {
        let (_, training) = training_set_from_observations(&obs, &grid, cfg.n_blocks, BINDING_TOL)?;
        if recovery.is_none() {
            recovery = Some(RecoveryRate::from_training(&training));
        }
        let mut sample_errors = Vec::new();
        for k in 0..training.n_gens {
            for j in 0..training.n_blocks {
                for (&c0, &id) in training.data[k][j].iter().zip(&training.sources[k][j]) {
                    sample_errors.push((c0 - ground_truth.price(id, k, j)) / ground_truth.price(id, k, j));
                }
            }
        }
        let mut reports = Vec::new();
        let mut errs = [Vec::new(), Vec::new()];
        for (i, (p, eta)) in [(1.0, cfg.eta_l1), (2.0, cfg.eta_l2)].into_iter().enumerate() {
            let gd = GdConfig {
                p,
                iterations: cfg.iterations,
                eta: LearningRate::Fixed(eta),
                c_bar: 200.0,
                bounds: None,
                init: InitRule::Constant(cfg.init),
                record_trajectory: false,
            };
            let result = gd_recover(&training, &gd)?;
            let rep = recovery_report(&training, &gd, &result, Some(&ground_truth));
            errs[i] = rep.iter().filter_map(|r| r.rel_error).collect();
            if i == 0 {
                reports = rep;
            }
        }
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        settings.push(MismatchSetting {
            label,
            mean_rel_error_l1: mean(&errs[0]),
            mean_rel_error_l2: mean(&errs[1]),
            sample_errors,
            blocks: reports,
        });
    }
    Ok(MismatchResult {
        stats,
        n_observations: observations.len(),
        skipped,
        recovery: recovery.expect("at least the clean variant"),
        settings,
        nodes,
    })
}
