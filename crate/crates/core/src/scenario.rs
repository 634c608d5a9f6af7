//! Offer curves built from quadratic costs, random offer fluctuation and load
//! scenarios.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::grid::Grid;

/// Generation cost `c0 + c1·x + c2·x²` in $/h with `x` in MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCost {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl QuadraticCost {
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + self.c1 * x + self.c2 * x * x
    }

    /// Multiplies the energy terms `c1`, `c2` by `factor`; `c0` is left alone.
    pub fn scale_energy(&self, factor: f64) -> QuadraticCost {
        QuadraticCost {
            c0: self.c0,
            c1: self.c1 * factor,
            c2: self.c2 * factor,
        }
    }
}

/// Cost coefficients of the five generators of the 14-bus study case,
/// in grid generator order.
pub const IEEE14_COSTS: [QuadraticCost; 5] = [
    QuadraticCost { c0: 2.0, c1: 0.05, c2: 0.002 },
    QuadraticCost { c0: 5.0, c1: 0.10, c2: 0.003 },
    QuadraticCost { c0: 8.0, c1: 0.15, c2: 0.004 },
    QuadraticCost { c0: 12.0, c1: 0.20, c2: 0.005 },
    QuadraticCost { c0: 15.0, c1: 0.30, c2: 0.006 },
];

/// Factor applied to `c1`, `c2` of [`IEEE14_COSTS`] in the experiments so
/// block prices land in the tens of $/MWh (see the README).
pub const DEFAULT_PRICE_SCALE: f64 = 100.0;

/// Stepwise offer of one generator.
///
/// `bounds` has `n_blocks + 1` increasing entries from `x_min` to `x_max`;
/// block `j` covers `[bounds[j], bounds[j+1]]` and is priced at `prices[j]`
/// $/MWh. The segment below `x_min` is priced at block 0's price.
/// `no_load` is charged per committed hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferCurve {
    pub bounds: Vec<f64>,
    pub prices: Vec<f64>,
    #[serde(default)]
    pub no_load: f64,
}

impl OfferCurve {
    pub fn n_blocks(&self) -> usize {
        self.prices.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.bounds[j + 1] - self.bounds[j]
    }

    pub fn x_min(&self) -> f64 {
        self.bounds[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.bounds.last().expect("offer has bounds")
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.prices.windows(2).all(|w| w[0] < w[1])
    }

    /// Offer cost of producing `x` MW when committed, excluding `no_load`.
    pub fn energy_cost(&self, x: f64) -> f64 {
        let mut cost = self.prices[0] * self.x_min();
        for j in 0..self.n_blocks() {
            let fill = (x - self.bounds[j]).clamp(0.0, self.width(j));
            cost += fill * self.prices[j];
        }
        cost
    }
}

/// Equal-width block edges between `x_min` and `x_max`.
pub fn block_bounds(x_min: f64, x_max: f64, n_blocks: usize) -> Vec<f64> {
    let w = (x_max - x_min) / n_blocks as f64;
    (0..=n_blocks)
        .map(|j| if j == n_blocks { x_max } else { x_min + w * j as f64 })
        .collect()
}

/// Stepwise baseline: each block priced at the cost's average slope over it,
/// `(C(x_{j+1}) − C(x_j)) / (x_{j+1} − x_j)`.
pub fn build_offer_baseline(
    cost: &QuadraticCost,
    x_min: f64,
    x_max: f64,
    n_blocks: usize,
) -> Result<OfferCurve, ScenarioError> {
    if n_blocks == 0 {
        return Err(ScenarioError::Config("n_blocks must be at least 1".into()));
    }
    let bounds = block_bounds(x_min, x_max, n_blocks);
    let mut prices = Vec::with_capacity(n_blocks);
    for (j, w) in bounds.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(ScenarioError::ZeroWidthBlock { block: j });
        }
        prices.push((cost.eval(w[1]) - cost.eval(w[0])) / (w[1] - w[0]));
    }
    Ok(OfferCurve {
        bounds,
        prices,
        no_load: cost.c0,
    })
}

/// Baselines for every generator of `grid`.
pub fn baselines_for(
    grid: &Grid,
    costs: &[QuadraticCost],
    n_blocks: usize,
) -> Result<Vec<OfferCurve>, ScenarioError> {
    if costs.len() != grid.n_gens() {
        return Err(ScenarioError::Config(format!(
            "{} cost curves for {} generators",
            costs.len(),
            grid.n_gens()
        )));
    }
    costs
        .iter()
        .enumerate()
        .map(|(k, c)| build_offer_baseline(c, grid.gen_min[k], grid.gen_max[k], n_blocks))
        .collect()
}

/// Random quadratic costs for a synthetic fleet: `c1` in 10–40 $/MWh and
/// `c2` so the last block is 20–60% dearer than the first.
pub fn random_costs<R: Rng>(grid: &Grid, rng: &mut R) -> Vec<QuadraticCost> {
    (0..grid.n_gens())
        .map(|k| {
            let c1 = rng.gen_range(10.0..40.0);
            let span = grid.gen_max[k].max(1.0);
            let c2 = c1 * rng.gen_range(0.2..0.6) / (2.0 * span);
            QuadraticCost {
                c0: rng.gen_range(5.0..50.0),
                c1,
                c2,
            }
        })
        .collect()
}

/// Offers for one scenario: every block price gets an independent
/// `N(0, σ²)` deviation. A generator whose perturbed prices are not strictly
/// increasing has its whole vector redrawn.
pub fn sample_offers<R: Rng>(
    baseline: &[OfferCurve],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<OfferCurve>, ScenarioError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ScenarioError::Config(format!("sigma must be ≥ 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(baseline.to_vec());
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut out = Vec::with_capacity(baseline.len());
    for curve in baseline {
        let mut tries = 0usize;
        loop {
            let prices: Vec<f64> = curve.prices.iter().map(|p| p + normal.sample(rng)).collect();
            let candidate = OfferCurve {
                prices,
                ..curve.clone()
            };
            if candidate.is_strictly_increasing() {
                out.push(candidate);
                break;
            }
            tries += 1;
            if tries > 10_000 {
                return Err(ScenarioError::Config(format!(
                    "sigma {sigma} too large to keep offers increasing"
                )));
            }
        }
    }
    Ok(out)
}

/// How per-bus load vectors are drawn for each scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadSweep {
    /// Total load as a fraction of installed capacity, swept over this range.
    pub low: f64,
    pub high: f64,
    /// Relative per-bus multiplicative jitter, uniform in `[1 − j, 1 + j]`.
    pub jitter: f64,
}

impl Default for LoadSweep {
    fn default() -> Self {
        LoadSweep {
            low: 0.02,
            high: 0.98,
            jitter: 0.2,
        }
    }
}

/// Load for scenario `index` of `count`. The total is stratified across the
/// sweep range so that every load level is visited; the per-bus shape follows
/// the grid's base load with jitter, and the jittered vector is rescaled to
/// hit the drawn total exactly.
pub fn sweep_load<R: Rng>(
    grid: &Grid,
    sweep: &LoadSweep,
    index: usize,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let cap = grid.total_capacity();
    let u: f64 = rng.gen();
    let frac = sweep.low + (sweep.high - sweep.low) * (index as f64 + u) / count.max(1) as f64;
    let total = frac * cap;
    let shape: Vec<f64> = grid
        .base_load
        .iter()
        .map(|&b| {
            let j = if sweep.jitter > 0.0 {
                rng.gen_range(1.0 - sweep.jitter..=1.0 + sweep.jitter)
            } else {
                1.0
            };
            b.max(0.0) * j
        })
        .collect();
    let sum: f64 = shape.iter().sum();
    if sum <= 0.0 {
        let mut e = vec![0.0; grid.n_buses];
        e[grid.reference_bus] = total;
        return e;
    }
    shape.iter().map(|s| s * total / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn g1_first_block_price() {
        let curve = build_offer_baseline(&IEEE14_COSTS[0], 0.0, 100.0, 5).unwrap();
        assert_eq!(curve.bounds, vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        assert!((curve.prices[0] - 0.09).abs() < 1e-12);
        assert!(curve.is_strictly_increasing());
    }

    #[test]
    fn linear_cost_gives_flat_offer() {
        let c = QuadraticCost { c0: 1.0, c1: 7.0, c2: 0.0 };
        let curve = build_offer_baseline(&c, 10.0, 50.0, 4).unwrap();
        assert!(curve.prices.iter().all(|p| (p - 7.0).abs() < 1e-12));
    }

    #[test]
    fn single_block_is_secant_slope() {
        let c = IEEE14_COSTS[3];
        let curve = build_offer_baseline(&c, 10.0, 90.0, 1).unwrap();
        let secant = (c.eval(90.0) - c.eval(10.0)) / 80.0;
        assert!((curve.prices[0] - secant).abs() < 1e-12);
    }

    #[test]
    fn zero_width_block_is_an_error() {
        let err = build_offer_baseline(&IEEE14_COSTS[0], 50.0, 50.0, 2).unwrap_err();
        assert!(matches!(err, ScenarioError::ZeroWidthBlock { block: 0 }));
    }

    #[test]
    fn energy_cost_matches_integrated_blocks() {
        let curve = build_offer_baseline(&IEEE14_COSTS[1], 0.0, 100.0, 5).unwrap();
        // at a block edge the stepwise cost equals the quadratic energy cost
        let c = IEEE14_COSTS[1];
        assert!((curve.energy_cost(60.0) - (c.eval(60.0) - c.c0)).abs() < 1e-9);
    }

    #[test]
    fn sampling_keeps_offers_increasing() {
        let base: Vec<OfferCurve> = IEEE14_COSTS
            .iter()
            .map(|c| build_offer_baseline(&c.scale_energy(100.0), 0.0, 100.0, 5).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = sample_offers(&base, 2.0, &mut rng).unwrap();
            assert!(s.iter().all(|c| c.is_strictly_increasing()));
        }
    }
}
