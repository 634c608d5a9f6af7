//! Multi-hour security-constrained unit commitment with reserves and ramping.
//!
//! Every hour carries the reserve-extended dispatch model (system reserve
//! requirements, reserve-aware generator limits); consecutive hours are
//! coupled by ramp limits
//!
//! `x_t + r⁺_t − x_{t−1} + r⁻_{t−1} ≤ R_up·u_{t−1} + v_t·x_min`   (`φ⁺_t`)
//! `x_{t−1} + r⁺_{t−1} − x_t + r⁻_t ≤ R_down·u_t + w_t·x_min`     (`φ⁻_t`)
//!
//! where `v_t`, `w_t` flag start-ups and shut-downs. The first hour has no
//! ramp rows: the initial state is free. The start-up indicator is a
//! continuous column squeezed by `v ≥ u_t − u_{t−1}`, `v ≤ u_t`,
//! `v ≤ 1 − u_{t−1}`, which pins it to the right 0/1 value whenever the
//! commitment is integral, and `w_t = v_t − u_t + u_{t−1}` is substituted.
//!
//! The MILP is solved once, the commitment is fixed and the resulting LP
//! yields hourly prices exactly as in the single-hour model.

use log::{debug, info};
use lp_kernel::{
    certify, solve_milp_with, LpProblem, LpSolution, MilpOptions, MilpProblem, MilpStatus, Sense,
    BINDING_TOL,
};
use serde::{Deserialize, Serialize};

use crate::error::MarketError;
use crate::grid::Grid;
use crate::market::{
    add_expr_row, add_period, check_dims, eval_expr, extract_period, initial_lines, violated_lines,
    CommitSpec, DispatchResult, Expr, PeriodLayout, ReserveConfig,
};
use crate::scenario::OfferCurve;

/// Multiplier above which a tight row counts as binding, $/MWh.
///
/// Reserve holdings are often degenerate, so rows can be tight with a zero
/// multiplier depending on which vertex the LP lands on; such rows do not
/// move prices. Power limits are also counted as binding whenever the
/// output itself sits on `x_min` or `x_max`, since the multiplier split
/// between a power limit and a ramp row tight at the same point is
/// arbitrary.
pub const MULTIPLIER_TOL: f64 = 1e-6;

/// Ramp rates per generator, MW/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampConfig {
    pub ramp_up: Vec<f64>,
    pub ramp_down: Vec<f64>,
}

impl RampConfig {
    /// Both rates equal to `fraction` of each generator's capacity.
    pub fn fraction_of_capacity(grid: &Grid, fraction: f64) -> RampConfig {
        let r: Vec<f64> = grid.gen_max.iter().map(|c| c * fraction).collect();
        RampConfig {
            ramp_up: r.clone(),
            ramp_down: r,
        }
    }
}

/// Branch-and-bound limits for the horizon MILP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScucOptions {
    pub rel_gap: f64,
    pub node_limit: usize,
}

impl Default for ScucOptions {
    fn default() -> Self {
        ScucOptions {
            rel_gap: 1e-4,
            node_limit: 2_000,
        }
    }
}

/// How often the two constraint families bind over committed generator-hours.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingStats {
    pub only_power: usize,
    pub only_ramp: usize,
    pub both: usize,
    pub neither: usize,
}

impl BindingStats {
    pub fn total(&self) -> usize {
        self.only_power + self.only_ramp + self.both + self.neither
    }

    /// `[only_power, only_ramp, both, neither]` as fractions of the total.
    pub fn fractions(&self) -> [f64; 4] {
        let t = self.total().max(1) as f64;
        [
            self.only_power as f64 / t,
            self.only_ramp as f64 / t,
            self.both as f64 / t,
            self.neither as f64 / t,
        ]
    }

    pub fn add(&mut self, power: bool, ramp: bool) {
        match (power, ramp) {
            (true, false) => self.only_power += 1,
            (false, true) => self.only_ramp += 1,
            (true, true) => self.both += 1,
            (false, false) => self.neither += 1,
        }
    }

    pub fn merge(&mut self, other: &BindingStats) {
        self.only_power += other.only_power;
        self.only_ramp += other.only_ramp;
        self.both += other.both;
        self.neither += other.neither;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScucResult {
    /// Per-hour dispatch and prices. Each hour's `dual_objective` is NaN:
    /// the dual objective only exists for the whole horizon.
    pub hours: Vec<DispatchResult>,
    /// Offer plus no-load cost over the horizon.
    pub objective: f64,
    pub dual_objective: f64,
    pub nodes: usize,
    pub status: MilpStatus,
    /// `[hour][generator]` multipliers of the ramp rows; zero at hour 0.
    pub phi_plus: Vec<Vec<f64>>,
    pub phi_minus: Vec<Vec<f64>>,
    /// `[hour][generator]`: output on a limit, or a reserve-aware power
    /// limit binding with a positive multiplier.
    pub power_binding: Vec<Vec<bool>>,
    /// `[hour][generator]`: a ramp row involving this hour's output binds
    /// with a positive multiplier.
    pub ramp_binding: Vec<Vec<bool>>,
    pub stats: BindingStats,
}

struct HourCols {
    layout: PeriodLayout,
    u: Vec<usize>,
}

struct Horizon {
    lp: LpProblem,
    hours: Vec<HourCols>,
    /// `[hour][generator]` ramp rows `(up, down)`; `None` for hour 0.
    ramp_rows: Vec<Option<Vec<(usize, usize)>>>,
}

fn build_horizon(
    grid: &Grid,
    offers: &[OfferCurve],
    loads: &[Vec<f64>],
    reserve: &ReserveConfig,
    ramp: &RampConfig,
    lines: &[Vec<usize>],
) -> Result<Horizon, MarketError> {
    let n = grid.n_gens();
    let mut lp = LpProblem::new();
    let mut hours: Vec<HourCols> = Vec::with_capacity(loads.len());
    let mut ramp_rows = Vec::with_capacity(loads.len());
    for (t, load) in loads.iter().enumerate() {
        let u: Vec<usize> = offers
            .iter()
            .map(|o| lp.add_var(o.no_load + o.prices[0] * o.x_min(), 0.0, 1.0))
            .collect::<Result<_, _>>()?;
        let layout = add_period(
            &mut lp,
            grid,
            offers,
            load,
            &CommitSpec::Columns(u.clone()),
            Some(reserve),
            &lines[t],
        )?;
        if t == 0 {
            ramp_rows.push(None);
        } else {
            let prev = &hours[t - 1];
            let (rp_prev, rm_prev) = reserve_cols(&prev.layout);
            let (rp, rm) = reserve_cols(&layout);
            let mut rows = Vec::with_capacity(n);
            for k in 0..n {
                let x_min = offers[k].x_min();
                // start-up indicator
                let v = lp.add_var(0.0, 0.0, 1.0)?;
                lp.add_row(vec![(v, 1.0), (u[k], -1.0), (prev.u[k], 1.0)], Sense::Ge, 0.0)?;
                lp.add_row(vec![(v, 1.0), (u[k], -1.0)], Sense::Le, 0.0)?;
                lp.add_row(vec![(v, 1.0), (prev.u[k], 1.0)], Sense::Le, 1.0)?;

                let mut up = Expr::default();
                up.add_scaled(&layout.output[k], 1.0);
                up.terms.push((rp[k], 1.0));
                up.add_scaled(&prev.layout.output[k], -1.0);
                up.terms.push((rm_prev[k], 1.0));
                up.terms.push((prev.u[k], -ramp.ramp_up[k]));
                up.terms.push((v, -x_min));
                let up_row = add_expr_row(&mut lp, &up, Sense::Le, 0.0)?;

                // w = v − u_t + u_{t−1}
                let mut down = Expr::default();
                down.add_scaled(&prev.layout.output[k], 1.0);
                down.terms.push((rp_prev[k], 1.0));
                down.add_scaled(&layout.output[k], -1.0);
                down.terms.push((rm[k], 1.0));
                down.terms.push((u[k], -ramp.ramp_down[k]));
                down.terms.push((v, -x_min));
                down.terms.push((u[k], x_min));
                down.terms.push((prev.u[k], -x_min));
                let down_row = add_expr_row(&mut lp, &down, Sense::Le, 0.0)?;
                rows.push((up_row, down_row));
            }
            ramp_rows.push(Some(rows));
        }
        hours.push(HourCols { layout, u });
    }
    Ok(Horizon {
        lp,
        hours,
        ramp_rows,
    })
}

fn reserve_cols(layout: &PeriodLayout) -> (&[usize], &[usize]) {
    (
        layout.r_plus.as_deref().expect("horizon hours carry reserves"),
        layout.r_minus.as_deref().expect("horizon hours carry reserves"),
    )
}

/// Solves the horizon MILP; `Ok(None)` when it is infeasible.
fn solve_horizon(
    grid: &Grid,
    offers: &[OfferCurve],
    loads: &[Vec<f64>],
    reserve: &ReserveConfig,
    ramp: &RampConfig,
    options: &ScucOptions,
) -> Result<Option<(Horizon, lp_kernel::MilpSolution, Vec<Vec<f64>>)>, MarketError> {
    let mut lines: Vec<Vec<usize>> = vec![initial_lines(grid); loads.len()];
    loop {
        let horizon = build_horizon(grid, offers, loads, reserve, ramp, &lines)?;
        let binaries: Vec<usize> = horizon.hours.iter().flat_map(|h| h.u.iter().copied()).collect();
        let milp = MilpProblem::new(horizon.lp.clone(), binaries)?;

        let sol = solve_milp_with(
            &milp,
            &MilpOptions {
                rel_gap: options.rel_gap,
                node_limit: options.node_limit,
                rounding_heuristic: true,
            },
        )?;
        debug!("horizon of {} hours: {:?} after {} nodes", loads.len(), sol.status, sol.nodes);
        let Some(lp_sol) = sol.lp.as_ref() else {
            return Ok(None);
        };
        let mut added = false;
        let mut outputs = Vec::with_capacity(loads.len());
        for (t, h) in horizon.hours.iter().enumerate() {
            let x: Vec<f64> = h.layout.output.iter().map(|e| eval_expr(e, &lp_sol.primal)).collect();
            let flows = grid.line_flows(&grid.net_injection(&x, &loads[t]));
            let extra = violated_lines(grid, &flows, &lines[t]);
            if !extra.is_empty() {
                lines[t].extend(extra);
                lines[t].sort_unstable();
                added = true;
            }
            outputs.push(x);
        }
        if !added {
            return Ok(Some((horizon, sol, outputs)));
        }
    }
}

/// Clears a multi-hour horizon and extracts hourly prices and binding masks.
pub fn clear_scuc_ramping(
    grid: &Grid,
    offers: &[OfferCurve],
    load_profile: &[Vec<f64>],
    reserve: &ReserveConfig,
    ramp: &RampConfig,
    options: &ScucOptions,
) -> Result<ScucResult, MarketError> {
    if load_profile.len() < 2 {
        return Err(MarketError::Config(format!(
            "a ramping horizon needs at least 2 hours, got {}",
            load_profile.len()
        )));
    }
    for load in load_profile {
        check_dims(grid, offers, load)?;
    }
    let n = grid.n_gens();
    for (what, v) in [("ramp_up", &ramp.ramp_up), ("ramp_down", &ramp.ramp_down)] {
        if v.len() != n {
            return Err(MarketError::Dimension {
                what,
                expected: n,
                got: v.len(),
            });
        }
        if v.iter().any(|r| !(*r >= 0.0)) {
            return Err(MarketError::Config(format!("{what} rates must be ≥ 0")));
        }
    }
    if reserve.r_plus < 0.0 || reserve.r_minus < 0.0 || reserve.price < 0.0 {
        return Err(MarketError::Config("reserve requirements and price must be ≥ 0".into()));
    }

    let Some((horizon, milp, outputs)) = solve_horizon(grid, offers, load_profile, reserve, ramp, options)?
    else {
        return Err(MarketError::HorizonInfeasible {
            hour: first_infeasible_hour(grid, offers, load_profile, reserve, ramp, options)?,
        });
    };
    let sol: &LpSolution = milp.lp.as_ref().expect("feasible horizon has an LP");
    // certify against the LP the prices come from: commitment pinned
    let mut fixed = horizon.lp.clone();
    for (h, on) in horizon.hours.iter().zip(milp.assignment.chunks(n)) {
        for (&c, &v) in h.u.iter().zip(on) {
            let v = if v { 1.0 } else { 0.0 };
            fixed.set_bounds(c, v, v)?;
        }
    }
    let cert = certify(&fixed, sol);
    let t_len = load_profile.len();
    let commit: Vec<Vec<bool>> = milp.assignment.chunks(n).map(|c| c.to_vec()).collect();

    let mut phi_plus = vec![vec![0.0; n]; t_len];
    let mut phi_minus = vec![vec![0.0; n]; t_len];
    let mut ramp_binding = vec![vec![false; n]; t_len];
    for t in 1..t_len {
        let rows = horizon.ramp_rows[t].as_ref().expect("ramp rows after hour 0");
        for (k, &(up, down)) in rows.iter().enumerate() {
            phi_plus[t][k] = sol.duals[up];
            phi_minus[t][k] = sol.duals[down];
            if phi_plus[t][k] > MULTIPLIER_TOL || phi_minus[t][k] > MULTIPLIER_TOL {
                // both rows involve x_t and x_{t−1}
                ramp_binding[t][k] = true;
                ramp_binding[t - 1][k] = true;
            }
        }
    }

    let mut hours = Vec::with_capacity(t_len);
    let mut power_binding = Vec::with_capacity(t_len);
    let mut stats = BindingStats::default();
    for (t, h) in horizon.hours.iter().enumerate() {
        let x = outputs[t].clone();
        let flows = grid.line_flows(&grid.net_injection(&x, &load_profile[t]));
        let mut d = extract_period(grid, offers, &commit[t], &h.layout, sol, x, flows, cert);
        d.dual_objective = f64::NAN;
        let res = d.reserves.as_ref().expect("horizon hours carry reserves");
        let pb: Vec<bool> = (0..n)
            .map(|k| {
                commit[t][k]
                    && (d.x[k] >= offers[k].x_max() - BINDING_TOL
                        || d.x[k] <= offers[k].x_min() + BINDING_TOL
                        || res.alpha_gen[k] > MULTIPLIER_TOL
                        || res.beta_gen[k] > MULTIPLIER_TOL)
            })
            .collect();
        for k in 0..n {
            if commit[t][k] {
                stats.add(pb[k], ramp_binding[t][k]);
            }
        }
        power_binding.push(pb);
        hours.push(d);
    }
    info!(
        "horizon of {t_len} hours cleared in {} nodes ({:?}), binding {:?}",
        milp.nodes, milp.status, stats
    );
    Ok(ScucResult {
        hours,
        objective: milp.objective,
        dual_objective: sol.dual_objective,
        nodes: milp.nodes,
        status: milp.status,
        phi_plus,
        phi_minus,
        power_binding,
        ramp_binding,
        stats,
    })
}

/// First hour `t` such that hours `0..=t` cannot be cleared together:
/// single hours are tried first, then growing prefixes.
fn first_infeasible_hour(
    grid: &Grid,
    offers: &[OfferCurve],
    loads: &[Vec<f64>],
    reserve: &ReserveConfig,
    ramp: &RampConfig,
    options: &ScucOptions,
) -> Result<usize, MarketError> {
    for t in 0..loads.len() {
        if solve_horizon(grid, offers, &loads[t..=t], reserve, ramp, options)?.is_none() {
            return Ok(t);
        }
    }
    for t in 1..loads.len() {
        if solve_horizon(grid, offers, &loads[..=t], reserve, ramp, options)?.is_none() {
            return Ok(t);
        }
    }
    // only reachable if the search limits made the full horizon look infeasible
    Ok(loads.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_fractions_sum_to_one() {
        let mut s = BindingStats::default();
        s.add(true, false);
        s.add(false, false);
        s.add(false, false);
        s.add(true, true);
        let f = s.fractions();
        assert_eq!(s.total(), 4);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(f[3], 0.5);
    }
}
