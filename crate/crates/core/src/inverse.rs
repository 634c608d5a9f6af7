//! Offer-price recovery from published clearing results.
//!
//! For a generator whose output sits strictly inside one of its offer blocks,
//! stationarity of the pricing LP says that block's price equals the nodal
//! price at the generator's bus. [`recover_sample`] reads those prices off one
//! observation; [`gd_recover`] combines many observations per block by
//! (projected) gradient descent on an `ℓp` loss.

use serde::{Deserialize, Serialize};

use crate::dataset::MarketObservation;
use crate::error::InverseError;
use crate::grid::Grid;
use crate::scenario::block_bounds;

/// Free-block mask `[generator][block]` of one observation: a block is free
/// when its generator is committed and the output lies strictly inside the
/// block, at least `tol` MW away from both edges.
pub fn identify_free_generators(
    obs: &MarketObservation,
    grid: &Grid,
    n_blocks: usize,
    tol: f64,
) -> Vec<Vec<bool>> {
    (0..grid.n_gens())
        .map(|k| {
            let edges = block_bounds(grid.gen_min[k], grid.gen_max[k], n_blocks);
            (0..n_blocks)
                .map(|j| obs.u[k] && obs.x[k] > edges[j] + tol && obs.x[k] < edges[j + 1] - tol)
                .collect()
        })
        .collect()
}

/// Prices recovered from one observation; `c0[k][j]` is meaningful only
/// where `free_mask[k][j]` is set and is zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySample {
    pub observation: usize,
    pub c0: Vec<Vec<f64>>,
    pub free_mask: Vec<Vec<bool>>,
    /// Buses hosting more than one free block; those blocks share one price.
    pub shared_buses: Vec<usize>,
}

/// Per-generator price `λ(1 − Σ_b S_bk) + Σ_b S_bk ω_b`, kept on free blocks.
///
/// The first term vanishes because every generator sits at exactly one bus;
/// that is checked rather than assumed.
pub fn recover_sample(
    obs: &MarketObservation,
    grid: &Grid,
    free_mask: &[Vec<bool>],
) -> Result<RecoverySample, InverseError> {
    let n = grid.n_gens();
    for (what, got, expected) in [
        ("observation omega", obs.omega.len(), grid.n_buses),
        ("observation u", obs.u.len(), n),
        ("free mask", free_mask.len(), n),
    ] {
        if got != expected {
            return Err(InverseError::Dimension { what, expected, got });
        }
    }
    let s = grid.incidence();
    let mut c0 = Vec::with_capacity(n);
    let mut free_per_bus = vec![0usize; grid.n_buses];
    for k in 0..n {
        let col_sum: f64 = (0..grid.n_buses).map(|b| s[b][k]).sum();
        if col_sum != 1.0 {
            return Err(InverseError::Incidence(k));
        }
        let price =
            obs.lambda * (1.0 - col_sum) + (0..grid.n_buses).map(|b| s[b][k] * obs.omega[b]).sum::<f64>();
        let row: Vec<f64> = free_mask[k].iter().map(|&f| if f { price } else { 0.0 }).collect();
        free_per_bus[grid.gen_bus[k]] += free_mask[k].iter().filter(|&&f| f).count();
        c0.push(row);
    }
    let shared_buses = free_per_bus
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 1)
        .map(|(b, _)| b)
        .collect();
    Ok(RecoverySample {
        observation: obs.id,
        c0,
        free_mask: free_mask.to_vec(),
        shared_buses,
    })
}

/// Valid samples per generator block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub n_gens: usize,
    pub n_blocks: usize,
    /// `data[k][j]`: recovered prices of block `j` of generator `k`.
    pub data: Vec<Vec<Vec<f64>>>,
    /// Observation id of every entry of `data`.
    pub sources: Vec<Vec<Vec<usize>>>,
}

impl TrainingSet {
    pub fn count(&self, k: usize, j: usize) -> usize {
        self.data[k][j].len()
    }

    /// `N_k` for every block, in `[generator][block]` layout.
    pub fn counts(&self) -> Vec<Vec<usize>> {
        self.data
            .iter()
            .map(|g| g.iter().map(|b| b.len()).collect())
            .collect()
    }

    /// Blocks with no valid sample.
    pub fn unrecoverable(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.n_gens {
            for j in 0..self.n_blocks {
                if self.data[k][j].is_empty() {
                    out.push((k, j));
                }
            }
        }
        out
    }

    pub fn active_blocks(&self) -> usize {
        self.data.iter().flatten().filter(|b| !b.is_empty()).count()
    }

    /// A training set holding a single block's samples, for tests and oracles.
    pub fn single(samples: Vec<f64>) -> TrainingSet {
        let ids = (0..samples.len()).collect();
        TrainingSet {
            n_gens: 1,
            n_blocks: 1,
            data: vec![vec![samples]],
            sources: vec![vec![ids]],
        }
    }
}

pub fn assemble_training_set(
    samples: &[RecoverySample],
    n_gens: usize,
    n_blocks: usize,
) -> Result<TrainingSet, InverseError> {
    let mut data = vec![vec![Vec::new(); n_blocks]; n_gens];
    let mut sources = vec![vec![Vec::new(); n_blocks]; n_gens];
    for s in samples {
        if s.free_mask.len() != n_gens || s.free_mask.iter().any(|r| r.len() != n_blocks) {
            return Err(InverseError::Dimension {
                what: "recovery sample",
                expected: n_gens * n_blocks,
                got: s.free_mask.iter().map(|r| r.len()).sum(),
            });
        }
        for k in 0..n_gens {
            for j in 0..n_blocks {
                if s.free_mask[k][j] {
                    data[k][j].push(s.c0[k][j]);
                    sources[k][j].push(s.observation);
                }
            }
        }
    }
    Ok(TrainingSet {
        n_gens,
        n_blocks,
        data,
        sources,
    })
}

/// Runs identification and closed-form recovery over every observation.
pub fn training_set_from_observations(
    observations: &[MarketObservation],
    grid: &Grid,
    n_blocks: usize,
    tol: f64,
) -> Result<(Vec<RecoverySample>, TrainingSet), InverseError> {
    let samples: Vec<RecoverySample> = observations
        .iter()
        .map(|o| {
            let mask = identify_free_generators(o, grid, n_blocks, tol);
            recover_sample(o, grid, &mask)
        })
        .collect::<Result<_, _>>()?;
    let set = assemble_training_set(&samples, grid.n_gens(), n_blocks)?;
    Ok((samples, set))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum LearningRate {
    Fixed(f64),
    /// `1 / (p · c̄^{p−2} · √T)`, the rate that yields the `p c̄^p / √T`
    /// per-block guarantee.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum InitRule {
    /// One starting value per block index, shared by all generators.
    PerBlock(Vec<f64>),
    Constant(f64),
    /// Midpoint of the projection box.
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub p: f64,
    pub iterations: usize,
    pub eta: LearningRate,
    /// Magnitude bound on prices, $/MWh.
    pub c_bar: f64,
    /// Projection box applied after every step.
    pub bounds: Option<(f64, f64)>,
    pub init: InitRule,
    /// Keep every iterate (memory `T+1` per block).
    pub record_trajectory: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            p: 1.0,
            iterations: 1000,
            eta: LearningRate::Auto,
            c_bar: 200.0,
            bounds: None,
            init: InitRule::PerBlock(vec![10.0, 20.0, 30.0, 40.0, 50.0]),
            record_trajectory: true,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<(), InverseError> {
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(InverseError::BadNorm(self.p));
        }
        if self.iterations == 0 {
            return Err(InverseError::Config("iterations must be at least 1".into()));
        }
        match self.eta {
            LearningRate::Fixed(e) if !(e > 0.0 && e.is_finite()) => {
                return Err(InverseError::Config(format!("learning rate {e} must be positive")))
            }
            LearningRate::Auto if !(self.c_bar > 0.0 && self.c_bar.is_finite()) => {
                return Err(InverseError::Config("automatic learning rate needs c_bar > 0".into()))
            }
            _ => {}
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo > 0.0 && lo < hi) {
                return Err(InverseError::Config(format!(
                    "projection box [{lo}, {hi}] needs 0 < lo < hi"
                )));
            }
        }
        if matches!(self.init, InitRule::Midpoint) && self.bounds.is_none() {
            return Err(InverseError::Config("midpoint start needs projection bounds".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self) -> f64 {
        match self.eta {
            LearningRate::Fixed(e) => e,
            LearningRate::Auto => {
                1.0 / (self.p * self.c_bar.powf(self.p - 2.0) * (self.iterations as f64).sqrt())
            }
        }
    }

    fn start(&self, j: usize) -> f64 {
        match &self.init {
            InitRule::PerBlock(v) => v[j.min(v.len() - 1)],
            InitRule::Constant(c) => *c,
            InitRule::Midpoint => {
                let (lo, hi) = self.bounds.expect("validated");
                0.5 * (lo + hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdResult {
    /// Last iterate per `[generator][block]`.
    pub c_hat: Vec<Vec<f64>>,
    /// Mean of iterates `0..T`, the point the convergence bound covers.
    pub c_avg: Vec<Vec<f64>>,
    /// Iterates `0..=T` per block (empty unless recorded).
    pub trajectory: Vec<Vec<Vec<f64>>>,
    pub final_loss: f64,
    pub eta: f64,
    /// `n·p·c̄^p/√T` with `n` = blocks that have samples.
    pub bound_epsilon: f64,
    /// The same bound with `n` = every generator block.
    pub bound_epsilon_all: f64,
}

/// `(1/N) Σ_i |c0_i − c|^p` for one block.
pub fn block_loss(samples: &[f64], c: f64, p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| (s - c).abs().powf(p)).sum::<f64>() / samples.len() as f64
}

/// Sum over blocks of [`block_loss`]; blocks without samples contribute 0.
pub fn total_loss(training: &TrainingSet, c: &[Vec<f64>], p: f64) -> f64 {
    let mut l = 0.0;
    for k in 0..training.n_gens {
        for j in 0..training.n_blocks {
            l += block_loss(&training.data[k][j], c[k][j], p);
        }
    }
    l
}

/// Derivative of `|s − c|^p` with respect to `c`; zero at a zero residual.
fn residual_gradient(s: f64, c: f64, p: f64) -> f64 {
    let r = s - c;
    if r == 0.0 {
        0.0
    } else if p == 1.0 {
        -r.signum()
    } else {
        -p * r.abs().powf(p - 1.0) * r.signum()
    }
}

pub fn gd_recover(training: &TrainingSet, cfg: &GdConfig) -> Result<GdResult, InverseError> {
    cfg.validate()?;
    if let InitRule::PerBlock(v) = &cfg.init {
        if v.is_empty() {
            return Err(InverseError::Config("empty per-block start vector".into()));
        }
    }
    let eta = cfg.learning_rate();
    let t_max = cfg.iterations;
    let mut c_hat = vec![vec![0.0; training.n_blocks]; training.n_gens];
    let mut c_avg = c_hat.clone();
    let mut trajectory = vec![vec![Vec::new(); training.n_blocks]; training.n_gens];
    for k in 0..training.n_gens {
        for j in 0..training.n_blocks {
            let data = &training.data[k][j];
            let mut c = cfg.start(j);
            if let Some((lo, hi)) = cfg.bounds {
                c = c.clamp(lo, hi);
            }
            let mut sum = 0.0;
            if cfg.record_trajectory {
                trajectory[k][j].reserve(t_max + 1);
                trajectory[k][j].push(c);
            }
            for _ in 0..t_max {
                sum += c;
                if !data.is_empty() {
                    let g: f64 =
                        data.iter().map(|&s| residual_gradient(s, c, cfg.p)).sum::<f64>() / data.len() as f64;
                    c -= eta * g;
                    if let Some((lo, hi)) = cfg.bounds {
                        c = c.clamp(lo, hi);
                    }
                }
                if cfg.record_trajectory {
                    trajectory[k][j].push(c);
                }
            }
            c_hat[k][j] = c;
            c_avg[k][j] = sum / t_max as f64;
        }
    }
    let final_loss = total_loss(training, &c_hat, cfg.p);
    let n_all = training.n_gens * training.n_blocks;
    Ok(GdResult {
        c_hat,
        c_avg,
        trajectory,
        final_loss,
        eta,
        bound_epsilon: error_bound(training.active_blocks(), cfg.p, cfg.c_bar, t_max),
        bound_epsilon_all: error_bound(n_all, cfg.p, cfg.c_bar, t_max),
    })
}

/// Sample mean per block; `None` where there are no samples.
pub fn closed_form_l2(training: &TrainingSet) -> Vec<Vec<Option<f64>>> {
    training
        .data
        .iter()
        .map(|g| {
            g.iter()
                .map(|b| {
                    if b.is_empty() {
                        None
                    } else {
                        Some(b.iter().sum::<f64>() / b.len() as f64)
                    }
                })
                .collect()
        })
        .collect()
}

/// `n · p · c̄^p / √T`.
pub fn error_bound(n_blocks_active: usize, p: f64, c_bar: f64, iterations: usize) -> f64 {
    n_blocks_active as f64 * p * c_bar.powf(p) / (iterations as f64).sqrt()
}

/// Interval of minimizers of `Σ|s − c|`: the middle sample, or the gap
/// between the two middle samples for an even count.
pub fn median_interval(samples: &[f64]) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        (v[n / 2], v[n / 2])
    } else {
        (v[n / 2 - 1], v[n / 2])
    })
}

/// Minimizer and minimum of [`block_loss`] by a dense grid of `10⁵` points
/// over `[min − 1, max + 1]` (intersected with `bounds`) followed by
/// golden-section refinement around the best grid point.
pub fn loss_minimum_oracle(samples: &[f64], p: f64, bounds: Option<(f64, f64)>) -> (f64, f64) {
    const GRID: usize = 100_000;
    let lo0 = samples.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let (lo, hi) = match bounds {
        Some((a, b)) => (lo0.max(a), hi0.min(b)),
        None => (lo0, hi0),
    };
    let (lo, hi) = if lo <= hi {
        (lo, hi)
    } else {
        // every sample outside the box: the loss is monotone inside it
        let (a, b) = bounds.expect("only bounds can empty the range");
        (a, b)
    };
    let f = |c: f64| block_loss(samples, c, p);
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut best = (lo, f(lo));
    for i in 1..GRID {
        let c = lo + step * i as f64;
        let v = f(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [best, (x1, f1), (x2, f2), (mid, f(mid))];
    candidates
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty")
}

/// Accounting of which generator blocks a training set can price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryRate {
    pub total: usize,
    /// Blocks with at least one valid sample.
    pub recovered: usize,
    /// Blocks without samples whose generator has another recovered block.
    pub non_free: usize,
    /// Blocks of generators with no recovered block at all.
    pub never_marginal: usize,
}

impl RecoveryRate {
    pub fn from_training(training: &TrainingSet) -> RecoveryRate {
        let mut r = RecoveryRate {
            total: training.n_gens * training.n_blocks,
            recovered: 0,
            non_free: 0,
            never_marginal: 0,
        };
        for k in 0..training.n_gens {
            let any = training.data[k].iter().any(|b| !b.is_empty());
            for j in 0..training.n_blocks {
                if !training.data[k][j].is_empty() {
                    r.recovered += 1;
                } else if any {
                    r.non_free += 1;
                } else {
                    r.never_marginal += 1;
                }
            }
        }
        r
    }

    pub fn balanced(&self) -> bool {
        self.recovered + self.non_free + self.never_marginal == self.total
    }

    pub fn rate(&self) -> f64 {
        self.recovered as f64 / self.total.max(1) as f64
    }
}

/// One row of a recovery report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub generator: usize,
    pub block: usize,
    pub n_valid: usize,
    pub c_hat: f64,
    pub c_avg: f64,
    /// Reference value when ground truth is available.
    pub truth: Option<f64>,
    pub rel_error: Option<f64>,
    pub bound_epsilon: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_subgradient_is_zero_at_zero_residual() {
        assert_eq!(residual_gradient(3.0, 3.0, 1.0), 0.0);
        assert_eq!(residual_gradient(4.0, 3.0, 1.0), -1.0);
        assert_eq!(residual_gradient(4.0, 3.0, 2.0), -2.0);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(error_bound(1, 1.0, 1.0, 1), 1.0);
        assert_eq!(error_bound(3, 1.0, 10.0, 100), 3.0);
        let e1 = error_bound(5, 2.0, 50.0, 100);
        let e4 = error_bound(5, 2.0, 50.0, 400);
        assert!((e1 / e4 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn median_interval_even_and_odd() {
        assert_eq!(median_interval(&[3.0, 1.0, 2.0]), Some((2.0, 2.0)));
        assert_eq!(median_interval(&[4.0, 1.0, 3.0, 2.0]), Some((2.0, 3.0)));
        assert_eq!(median_interval(&[]), None);
    }

    #[test]
    fn bad_norm_rejected() {
        let cfg = GdConfig {
            p: 0.5,
            ..GdConfig::default()
        };
        assert!(matches!(
            gd_recover(&TrainingSet::single(vec![1.0]), &cfg),
            Err(InverseError::BadNorm(_))
        ));
    }
}
