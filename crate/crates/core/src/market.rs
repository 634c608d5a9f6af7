//! Day-ahead clearing: unit commitment, fixed-commitment DC-OPF with dual
//! extraction, nodal prices, KKT checks and the reserve-extended dispatch.
//!
//! Offers enter the LP one variable per block: generator `k` produces
//! `x_k = u_k·x_min_k + Σ_j y_kj` with `0 ≤ y_kj ≤ u_k·width_kj`. Block bound
//! multipliers are the per-block `α` (upper) and `β` (lower). Line rows carry
//! `μ` on `Φ(Sx − e) ≤ f_max` and `ν` on `Φ(Sx − e) ≥ −f_max`; `λ` is the
//! multiplier of the power balance, so prices follow
//! `ω = λ·1 − Φᵀμ + Φᵀν`.

use lp_kernel::{
    certify, solve_lp, solve_milp_with, Certificate, LpProblem, LpSolution, LpStatus,
    MilpOptions, MilpProblem, MilpStatus, Sense, BINDING_TOL,
};
use serde::{Deserialize, Serialize};

use crate::error::MarketError;
use crate::grid::Grid;
use crate::scenario::OfferCurve;

/// Networks with at most this many lines get every line row up front;
/// larger ones add line rows only once a dispatch violates them.
pub const LAZY_LINE_THRESHOLD: usize = 60;

/// Relative tolerance for line-limit violation when deciding to add rows.
const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Commitment {
    pub u: Vec<bool>,
    /// Offer cost plus no-load cost of the committed units.
    pub objective: f64,
    pub nodes: usize,
}

/// System-wide reserve requirements in MW.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReserveConfig {
    pub r_plus: f64,
    pub r_minus: f64,
    /// Price of holding one MW of either reserve, $/MW. A small positive
    /// price keeps reserve holdings at the requirement instead of letting
    /// the LP park spare reserve on arbitrary units.
    #[serde(default)]
    pub price: f64,
}

impl ReserveConfig {
    pub fn is_zero(&self) -> bool {
        self.r_plus == 0.0 && self.r_minus == 0.0
    }
}

/// Reserve quantities and multipliers of a reserve-extended dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReserveOutcome {
    pub r_plus: Vec<f64>,
    pub r_minus: Vec<f64>,
    pub theta_plus: f64,
    pub theta_minus: f64,
    /// Multipliers of `x + r⁺ ≤ u·x_max` and `x − r⁻ ≥ u·x_min`.
    pub alpha_gen: Vec<f64>,
    pub beta_gen: Vec<f64>,
    pub upper_binding: Vec<bool>,
    pub lower_binding: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub u: Vec<bool>,
    /// Output per generator, MW.
    pub x: Vec<f64>,
    /// Output above `x_min` per generator and block, MW.
    pub blocks: Vec<Vec<f64>>,
    pub lambda: f64,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub omega: Vec<f64>,
    pub flows: Vec<f64>,
    /// Offer cost `cᵀx` of the dispatch, $.
    pub objective: f64,
    /// Dual objective of the pricing LP (same constant offsets applied).
    pub dual_objective: f64,
    pub certificate: Certificate,
    pub reserves: Option<ReserveOutcome>,
}

impl DispatchResult {
    pub fn line_upper_binding(&self, grid: &Grid) -> Vec<bool> {
        self.flows
            .iter()
            .zip(&grid.line_limit)
            .map(|(f, lim)| lim - f <= BINDING_TOL)
            .collect()
    }

    pub fn line_lower_binding(&self, grid: &Grid) -> Vec<bool> {
        self.flows
            .iter()
            .zip(&grid.line_limit)
            .map(|(f, lim)| f + lim <= BINDING_TOL)
            .collect()
    }
}

/// A linear expression `Σ a_j x_j + constant`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Expr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn add_scaled(&mut self, other: &Expr, s: f64) {
        self.terms.extend(other.terms.iter().map(|&(j, a)| (j, a * s)));
        self.constant += other.constant * s;
    }
}

/// Adds `expr (sense) rhs` as a row, moving the constant to the right.
pub(crate) fn add_expr_row(
    lp: &mut LpProblem,
    expr: &Expr,
    sense: Sense,
    rhs: f64,
) -> Result<usize, MarketError> {
    Ok(lp.add_row(expr.terms.clone(), sense, rhs - expr.constant)?)
}

/// How commitment enters a single-period model.
#[derive(Debug, Clone)]
pub(crate) enum CommitSpec<'a> {
    Fixed(&'a [bool]),
    /// Commitment columns already present in the LP.
    Columns(Vec<usize>),
}

/// Column and row indices of one period of the clearing model.
#[derive(Debug, Clone)]
pub(crate) struct PeriodLayout {
    pub block: Vec<Vec<usize>>,
    pub r_plus: Option<Vec<usize>>,
    pub r_minus: Option<Vec<usize>>,
    pub balance: usize,
    pub gen_upper: Option<Vec<usize>>,
    pub gen_lower: Option<Vec<usize>>,
    pub reserve_rows: Option<(usize, usize)>,
    /// `(≤ row, ≥ row)` for each line that is in the model.
    pub line_rows: Vec<Option<(usize, usize)>>,
    /// `x_k` as an expression in the LP columns.
    pub output: Vec<Expr>,
    /// Objective terms not represented by columns (fixed commitment).
    pub objective_offset: f64,
}

/// Adds one period (blocks, balance, optional reserves, chosen lines) to `lp`.
pub(crate) fn add_period(
    lp: &mut LpProblem,
    grid: &Grid,
    offers: &[OfferCurve],
    load: &[f64],
    commit: &CommitSpec,
    reserve: Option<&ReserveConfig>,
    lines: &[usize],
) -> Result<PeriodLayout, MarketError> {
    let n = grid.n_gens();
    let mut block = Vec::with_capacity(n);
    let mut output = Vec::with_capacity(n);
    let mut objective_offset = 0.0;
    for (k, offer) in offers.iter().enumerate() {
        let on = match commit {
            CommitSpec::Fixed(u) => u[k],
            CommitSpec::Columns(_) => true,
        };
        let mut cols = Vec::with_capacity(offer.n_blocks());
        let mut expr = Expr::default();
        for j in 0..offer.n_blocks() {
            let hi = if on { offer.width(j) } else { 0.0 };
            let c = lp.add_var(offer.prices[j], 0.0, hi)?;
            cols.push(c);
            expr.terms.push((c, 1.0));
        }
        match commit {
            CommitSpec::Fixed(u) => {
                if u[k] {
                    expr.constant = offer.x_min();
                    objective_offset += offer.prices[0] * offer.x_min();
                }
            }
            CommitSpec::Columns(ucols) => {
                if offer.x_min() != 0.0 {
                    expr.terms.push((ucols[k], offer.x_min()));
                }
            }
        }
        block.push(cols);
        output.push(expr);
    }

    let total_load: f64 = load.iter().sum();
    let mut bal = Expr::default();
    for e in &output {
        bal.add_scaled(e, 1.0);
    }
    let balance = add_expr_row(lp, &bal, Sense::Eq, total_load)?;

    let (mut r_plus, mut r_minus) = (None, None);
    let (mut gen_upper, mut gen_lower, mut reserve_rows) = (None, None, None);
    if let Some(res) = reserve {
        let mut rp = Vec::with_capacity(n);
        let mut rm = Vec::with_capacity(n);
        for k in 0..n {
            let on = match commit {
                CommitSpec::Fixed(u) => u[k],
                CommitSpec::Columns(_) => true,
            };
            let cap = if on { f64::INFINITY } else { 0.0 };
            rp.push(lp.add_var(res.price, 0.0, cap)?);
            rm.push(lp.add_var(res.price, 0.0, cap)?);
        }
        let up = lp.add_row(rp.iter().map(|&c| (c, 1.0)).collect(), Sense::Ge, res.r_plus)?;
        let dn = lp.add_row(rm.iter().map(|&c| (c, 1.0)).collect(), Sense::Ge, res.r_minus)?;
        reserve_rows = Some((up, dn));
        r_plus = Some(rp);
        r_minus = Some(rm);
    }
    if reserve.is_some() || matches!(commit, CommitSpec::Columns(_)) {
        let mut upper_rows = Vec::with_capacity(n);
        let mut lower_rows = Vec::with_capacity(n);
        for (k, offer) in offers.iter().enumerate() {
            let span = offer.x_max() - offer.x_min();
            let mut e = Expr {
                terms: block[k].iter().map(|&c| (c, 1.0)).collect(),
                constant: 0.0,
            };
            if let Some(rp) = &r_plus {
                e.terms.push((rp[k], 1.0));
            }
            let rhs = match commit {
                CommitSpec::Fixed(u) => {
                    if u[k] {
                        span
                    } else {
                        0.0
                    }
                }
                CommitSpec::Columns(ucols) => {
                    e.terms.push((ucols[k], -span));
                    0.0
                }
            };
            upper_rows.push(add_expr_row(lp, &e, Sense::Le, rhs)?);
            if let Some(rm) = &r_minus {
                let mut e = Expr {
                    terms: block[k].iter().map(|&c| (c, 1.0)).collect(),
                    constant: 0.0,
                };
                e.terms.push((rm[k], -1.0));
                lower_rows.push(add_expr_row(lp, &e, Sense::Ge, 0.0)?);
            }
        }
        gen_upper = Some(upper_rows);
        if r_minus.is_some() {
            gen_lower = Some(lower_rows);
        }
    }

    let mut line_rows = vec![None; grid.n_lines()];
    for &l in lines {
        let (flow, phi_e) = line_flow_expr(grid, &output, load, l);
        let lim = grid.line_limit[l];
        let le = add_expr_row(lp, &flow, Sense::Le, lim + phi_e)?;
        let ge = add_expr_row(lp, &flow, Sense::Ge, -lim + phi_e)?;
        line_rows[l] = Some((le, ge));
    }

    Ok(PeriodLayout {
        block,
        r_plus,
        r_minus,
        balance,
        gen_upper,
        gen_lower,
        reserve_rows,
        line_rows,
        output,
        objective_offset,
    })
}

/// `(Σ_k Φ_{l,bus(k)} x_k, (Φe)_l)` for line `l`.
fn line_flow_expr(grid: &Grid, output: &[Expr], load: &[f64], l: usize) -> (Expr, f64) {
    let row = &grid.ptdf[l];
    let mut flow = Expr::default();
    for (k, &b) in grid.gen_bus.iter().enumerate() {
        if row[b] != 0.0 {
            flow.add_scaled(&output[k], row[b]);
        }
    }
    let phi_e: f64 = row.iter().zip(load).map(|(p, e)| p * e).sum();
    (flow, phi_e)
}

pub(crate) fn initial_lines(grid: &Grid) -> Vec<usize> {
    if grid.n_lines() <= LAZY_LINE_THRESHOLD {
        (0..grid.n_lines()).collect()
    } else {
        Vec::new()
    }
}

/// Lines not yet modelled whose flow exceeds the limit.
pub(crate) fn violated_lines(grid: &Grid, flows: &[f64], included: &[usize]) -> Vec<usize> {
    (0..grid.n_lines())
        .filter(|l| !included.contains(l))
        .filter(|&l| flows[l].abs() > grid.line_limit[l] * (1.0 + FLOW_TOL) + FLOW_TOL)
        .collect()
}

pub(crate) fn eval_expr(expr: &Expr, primal: &[f64]) -> f64 {
    expr.terms.iter().map(|&(j, a)| a * primal[j]).sum::<f64>() + expr.constant
}

pub(crate) fn check_dims(grid: &Grid, offers: &[OfferCurve], load: &[f64]) -> Result<(), MarketError> {
    if offers.len() != grid.n_gens() {
        return Err(MarketError::Dimension {
            what: "offers",
            expected: grid.n_gens(),
            got: offers.len(),
        });
    }
    if load.len() != grid.n_buses {
        return Err(MarketError::Dimension {
            what: "load",
            expected: grid.n_buses,
            got: load.len(),
        });
    }
    for (k, o) in offers.iter().enumerate() {
        if (o.x_min() - grid.gen_min[k]).abs() > 1e-9 || (o.x_max() - grid.gen_max[k]).abs() > 1e-9 {
            return Err(MarketError::Config(format!(
                "offer of generator {k} spans [{}, {}] but the grid says [{}, {}]",
                o.x_min(),
                o.x_max(),
                grid.gen_min[k],
                grid.gen_max[k]
            )));
        }
    }
    Ok(())
}

/// Unit commitment: the MILP over commitment binaries with no-load costs.
///
/// Branch and bound explores the "on" branch first and only replaces the
/// incumbent on strict improvement, so ties go to lower-index generators.
pub fn clear_uc(grid: &Grid, offers: &[OfferCurve], load: &[f64]) -> Result<Commitment, MarketError> {
    check_dims(grid, offers, load)?;
    let total: f64 = load.iter().sum();
    let capacity = grid.total_capacity();
    if total > capacity + 1e-9 {
        return Err(MarketError::InsufficientCapacity { load: total, capacity });
    }
    let mut lines = initial_lines(grid);
    loop {
        let mut lp = LpProblem::new();
        let ucols: Vec<usize> = offers
            .iter()
            .map(|o| lp.add_var(o.no_load + o.prices[0] * o.x_min(), 0.0, 1.0))
            .collect::<Result<_, _>>()?;
        let layout = add_period(
            &mut lp,
            grid,
            offers,
            load,
            &CommitSpec::Columns(ucols.clone()),
            None,
            &lines,
        )?;
        let milp = MilpProblem::new(lp, ucols)?;
        let sol = solve_milp_with(&milp, &MilpOptions::default())?;
        if sol.status == MilpStatus::Infeasible {
            return Err(MarketError::UcInfeasible { load: total, capacity });
        }
        let lp_sol = sol.lp.as_ref().expect("incumbent has an LP");
        let x: Vec<f64> = layout.output.iter().map(|e| eval_expr(e, &lp_sol.primal)).collect();
        let flows = grid.line_flows(&grid.net_injection(&x, load));
        let extra = violated_lines(grid, &flows, &lines);
        if extra.is_empty() {
            return Ok(Commitment {
                u: sol.assignment,
                objective: sol.objective,
                nodes: sol.nodes,
            });
        }
        lines.extend(extra);
        lines.sort_unstable();
    }
}

/// Fixed-commitment DC-OPF with every multiplier.
pub fn solve_dcopf(
    grid: &Grid,
    offers: &[OfferCurve],
    load: &[f64],
    u: &[bool],
) -> Result<DispatchResult, MarketError> {
    dispatch(grid, offers, load, u, None)
}

/// DC-OPF with system reserve requirements and reserve-aware power limits
/// `x + r⁺ ≤ u·x_max`, `x − r⁻ ≥ u·x_min`. The per-block capacity bounds of
/// the plain model remain; they are implied by the new rows.
pub fn solve_dcopf_reserves(
    grid: &Grid,
    offers: &[OfferCurve],
    load: &[f64],
    u: &[bool],
    reserve: &ReserveConfig,
) -> Result<DispatchResult, MarketError> {
    if reserve.r_plus < 0.0 || reserve.r_minus < 0.0 || reserve.price < 0.0 {
        return Err(MarketError::Config("reserve requirements and price must be ≥ 0".into()));
    }
    dispatch(grid, offers, load, u, Some(reserve))
}

fn dispatch(
    grid: &Grid,
    offers: &[OfferCurve],
    load: &[f64],
    u: &[bool],
    reserve: Option<&ReserveConfig>,
) -> Result<DispatchResult, MarketError> {
    check_dims(grid, offers, load)?;
    if u.len() != grid.n_gens() {
        return Err(MarketError::Dimension {
            what: "commitment",
            expected: grid.n_gens(),
            got: u.len(),
        });
    }
    let mut lines = initial_lines(grid);
    loop {
        let mut lp = LpProblem::new();
        let layout = add_period(&mut lp, grid, offers, load, &CommitSpec::Fixed(u), reserve, &lines)?;
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible if reserve.is_some() => {
                // distinguish a reserve shortfall from an energy infeasibility
                if dispatch(grid, offers, load, u, None).is_ok() {
                    return Err(MarketError::ReserveInfeasible);
                }
                return Err(MarketError::DispatchInfeasible);
            }
            _ => return Err(MarketError::DispatchInfeasible),
        }
        let x: Vec<f64> = layout.output.iter().map(|e| eval_expr(e, &sol.primal)).collect();
        let flows = grid.line_flows(&grid.net_injection(&x, load));
        let extra = violated_lines(grid, &flows, &lines);
        if extra.is_empty() {
            let cert = certify(&lp, &sol);
            return Ok(extract_period(grid, offers, u, &layout, &sol, x, flows, cert));
        }
        lines.extend(extra);
        lines.sort_unstable();
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn extract_period(
    grid: &Grid,
    offers: &[OfferCurve],
    u: &[bool],
    layout: &PeriodLayout,
    sol: &LpSolution,
    x: Vec<f64>,
    flows: Vec<f64>,
    certificate: Certificate,
) -> DispatchResult {
    let lambda = sol.row_prices[layout.balance];
    let mut mu = vec![0.0; grid.n_lines()];
    let mut nu = vec![0.0; grid.n_lines()];
    for (l, rows) in layout.line_rows.iter().enumerate() {
        if let Some((le, ge)) = *rows {
            mu[l] = sol.duals[le];
            nu[l] = sol.duals[ge];
        }
    }
    let mut blocks = Vec::with_capacity(offers.len());
    let mut alpha = Vec::with_capacity(offers.len());
    let mut beta = Vec::with_capacity(offers.len());
    let mut objective = 0.0;
    for (k, cols) in layout.block.iter().enumerate() {
        let y: Vec<f64> = cols.iter().map(|&c| sol.primal[c]).collect();
        let d: Vec<f64> = cols.iter().map(|&c| sol.reduced_costs[c]).collect();
        if u[k] {
            objective += offers[k].prices[0] * offers[k].x_min();
        }
        objective += y.iter().zip(&offers[k].prices).map(|(a, p)| a * p).sum::<f64>();
        alpha.push(d.iter().map(|v| (-v).max(0.0)).collect());
        beta.push(d.iter().map(|v| v.max(0.0)).collect());
        blocks.push(y);
    }
    let reserves = layout.r_plus.as_ref().map(|rp| {
        let rm = layout.r_minus.as_ref().expect("reserve columns come in pairs");
        let (up, dn) = layout.reserve_rows.expect("reserve rows exist");
        let upper = layout.gen_upper.as_ref().expect("reserve model has generator rows");
        let lower = layout.gen_lower.as_ref().expect("reserve model has generator rows");
        ReserveOutcome {
            r_plus: rp.iter().map(|&c| sol.primal[c]).collect(),
            r_minus: rm.iter().map(|&c| sol.primal[c]).collect(),
            theta_plus: sol.duals[up],
            theta_minus: sol.duals[dn],
            alpha_gen: upper.iter().map(|&r| sol.duals[r]).collect(),
            beta_gen: lower.iter().map(|&r| sol.duals[r]).collect(),
            upper_binding: upper.iter().zip(u).map(|(&r, &on)| on && sol.binding[r]).collect(),
            lower_binding: lower.iter().zip(u).map(|(&r, &on)| on && sol.binding[r]).collect(),
        }
    });
    let omega = compute_lmps(grid, lambda, &mu, &nu);
    DispatchResult {
        u: u.to_vec(),
        x,
        blocks,
        lambda,
        alpha,
        beta,
        mu,
        nu,
        omega,
        flows,
        objective,
        dual_objective: sol.dual_objective + layout.objective_offset,
        certificate,
        reserves,
    }
}

/// Nodal prices `ω = λ·1 − Φᵀμ + Φᵀν`.
pub fn compute_lmps(grid: &Grid, lambda: f64, mu: &[f64], nu: &[f64]) -> Vec<f64> {
    let mut omega = vec![lambda; grid.n_buses];
    for (l, row) in grid.ptdf.iter().enumerate() {
        let w = nu[l] - mu[l];
        if w != 0.0 {
            for (b, p) in row.iter().enumerate() {
                omega[b] += p * w;
            }
        }
    }
    omega
}

/// Nodal prices written through offer prices and bound multipliers:
///
/// `ω = (1/N)·J(c + α − β) + (I − (1/N)·J Sᵀ)·Φᵀ(ν − μ)`
///
/// where the sums run over all `N` block variables and `S` maps each block
/// to its generator's bus. Averaging the per-block stationarity conditions
/// gives `λ`, which is why the `1/N` factors appear.
pub fn lmps_from_offers(
    grid: &Grid,
    offers: &[OfferCurve],
    alpha: &[Vec<f64>],
    beta: &[Vec<f64>],
    mu: &[f64],
    nu: &[f64],
) -> Vec<f64> {
    let m = grid.n_buses;
    let mut cong = vec![0.0; m]; // Φᵀ(ν − μ)
    for (l, row) in grid.ptdf.iter().enumerate() {
        let w = nu[l] - mu[l];
        for b in 0..m {
            cong[b] += row[b] * w;
        }
    }
    let mut n_blocks = 0usize;
    let mut sum_c = 0.0;
    let mut sum_cong = 0.0;
    for (k, offer) in offers.iter().enumerate() {
        for j in 0..offer.n_blocks() {
            n_blocks += 1;
            sum_c += offer.prices[j] + alpha[k][j] - beta[k][j];
            sum_cong += cong[grid.gen_bus[k]];
        }
    }
    let nf = n_blocks as f64;
    cong.iter()
        .map(|g| sum_c / nf + g - sum_cong / nf)
        .collect()
}

/// Residuals of the DC-OPF optimality conditions at a dispatch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Balance, block bounds, line limits and `x` vs. block consistency.
    pub primal: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    /// Largest negative part of `α, β, μ, ν`.
    pub dual_sign: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.stationarity)
            .max(self.complementarity)
            .max(self.dual_sign)
    }
}

/// Per-block stationarity residual `c − λ + α − β + (ΦS)ᵀ(μ − ν)` using the
/// dispatch's own multipliers.
pub fn stationarity_residuals(
    grid: &Grid,
    offers: &[OfferCurve],
    d: &DispatchResult,
) -> Vec<Vec<f64>> {
    offers
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let bus_price = d.omega[grid.gen_bus[k]];
            (0..o.n_blocks())
                .map(|j| o.prices[j] - bus_price + d.alpha[k][j] - d.beta[k][j])
                .collect()
        })
        .collect()
}

/// Checks primal feasibility, stationarity, complementary slackness and dual
/// signs of the plain DC-OPF at `d`. All residuals are absolute.
pub fn kkt_residuals(grid: &Grid, offers: &[OfferCurve], load: &[f64], d: &DispatchResult) -> KktReport {
    let mut r = KktReport::default();
    let total: f64 = load.iter().sum();
    r.primal = r.primal.max((d.x.iter().sum::<f64>() - total).abs());
    for (k, o) in offers.iter().enumerate() {
        let base = if d.u[k] { o.x_min() } else { 0.0 };
        let from_blocks = base + d.blocks[k].iter().sum::<f64>();
        r.primal = r.primal.max((d.x[k] - from_blocks).abs());
        for j in 0..o.n_blocks() {
            let hi = if d.u[k] { o.width(j) } else { 0.0 };
            let y = d.blocks[k][j];
            r.primal = r.primal.max((-y).max(0.0)).max((y - hi).max(0.0));
            r.complementarity = r
                .complementarity
                .max((d.alpha[k][j] * (hi - y)).abs())
                .max((d.beta[k][j] * y).abs());
            r.dual_sign = r
                .dual_sign
                .max((-d.alpha[k][j]).max(0.0))
                .max((-d.beta[k][j]).max(0.0));
        }
    }
    // the ω used by stationarity must itself come from λ, μ, ν
    let omega = compute_lmps(grid, d.lambda, &d.mu, &d.nu);
    for (k, o) in offers.iter().enumerate() {
        let bus_price = omega[grid.gen_bus[k]];
        for j in 0..o.n_blocks() {
            let s = o.prices[j] - bus_price + d.alpha[k][j] - d.beta[k][j];
            r.stationarity = r.stationarity.max(s.abs());
        }
    }
    let flows = grid.line_flows(&grid.net_injection(&d.x, load));
    for l in 0..grid.n_lines() {
        let lim = grid.line_limit[l];
        r.primal = r.primal.max((flows[l] - lim).max(0.0)).max((-flows[l] - lim).max(0.0));
        r.complementarity = r
            .complementarity
            .max((d.mu[l] * (lim - flows[l])).abs())
            .max((d.nu[l] * (lim + flows[l])).abs());
        r.dual_sign = r.dual_sign.max((-d.mu[l]).max(0.0)).max((-d.nu[l]).max(0.0));
    }
    r
}

/// Smallest stationarity residual achievable with bound multipliers that
/// respect complementarity at the dispatched block levels; zero for a block
/// strictly inside its bounds only if its price equals the bus price.
pub fn plain_stationarity_gap(grid: &Grid, offers: &[OfferCurve], d: &DispatchResult) -> Vec<Vec<f64>> {
    offers
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let g_bus = d.omega[grid.gen_bus[k]];
            (0..o.n_blocks())
                .map(|j| {
                    let hi = if d.u[k] { o.width(j) } else { 0.0 };
                    let y = d.blocks[k][j];
                    let g = o.prices[j] - g_bus;
                    let at_lo = y <= BINDING_TOL;
                    let at_hi = y >= hi - BINDING_TOL;
                    match (at_lo, at_hi) {
                        (true, true) => 0.0,
                        (true, false) => (-g).max(0.0),
                        (false, true) => g.max(0.0),
                        (false, false) => g.abs(),
                    }
                })
                .collect()
        })
        .collect()
}
