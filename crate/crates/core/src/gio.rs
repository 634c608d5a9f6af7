//! Inverse optimization for a linear forward problem `min wᵀx  s.t.  Ax ≥ b`
//! with free `x`.
//!
//! Given an observed decision `x0`, the exact formulations ask whether some
//! nonnegative cost vector (normalized to `Σw = 1`) makes `x0` optimal; the
//! generalized ones find the cost vector that makes `x0` as close to optimal
//! as possible and report the residual.

use lp_kernel::{solve_lp, LpProblem, LpStatus, Sense};
use serde::{Deserialize, Serialize};

use crate::error::InverseError;

/// Slack above which a constraint counts as inactive.
pub const ACTIVE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardProblem {
    /// `m × n` constraint matrix, row-major.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl ForwardProblem {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, InverseError> {
        if a.len() != b.len() {
            return Err(InverseError::Dimension {
                what: "forward rhs",
                expected: a.len(),
                got: b.len(),
            });
        }
        let n = a.first().map_or(0, |r| r.len());
        if let Some(r) = a.iter().find(|r| r.len() != n) {
            return Err(InverseError::Dimension {
                what: "forward constraint row",
                expected: n,
                got: r.len(),
            });
        }
        Ok(ForwardProblem { a, b })
    }

    pub fn n_vars(&self) -> usize {
        self.a.first().map_or(0, |r| r.len())
    }

    pub fn n_rows(&self) -> usize {
        self.a.len()
    }

    /// `Ax − b`.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - b)
            .collect()
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.slacks(x).iter().all(|&s| s >= -tol)
    }

    /// Solves the forward LP for a given cost vector.
    pub fn solve(&self, w: &[f64]) -> Result<Option<Vec<f64>>, InverseError> {
        let mut lp = LpProblem::new();
        for &c in w {
            lp.add_var(c, f64::NEG_INFINITY, f64::INFINITY)?;
        }
        for (row, &b) in self.a.iter().zip(&self.b) {
            lp.add_row(row.iter().copied().enumerate().collect(), Sense::Ge, b)?;
        }
        let sol = solve_lp(&lp)?;
        Ok(sol.is_optimal().then_some(sol.primal))
    }

    fn check_point(&self, x0: &[f64]) -> Result<(), InverseError> {
        if x0.len() != self.n_vars() {
            return Err(InverseError::Dimension {
                what: "observed decision",
                expected: self.n_vars(),
                got: x0.len(),
            });
        }
        Ok(())
    }
}

/// Layout of the dual-side variables shared by every formulation:
/// `w ≥ 0` (n), `ξ ≥ 0` (m).
struct DualVars {
    w: Vec<usize>,
    xi: Vec<usize>,
}

fn add_dual_vars(lp: &mut LpProblem, fp: &ForwardProblem, xi_cost: &[f64]) -> Result<DualVars, InverseError> {
    let w = (0..fp.n_vars())
        .map(|_| lp.add_var(0.0, 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>, _>>()?;
    let xi = (0..fp.n_rows())
        .map(|i| lp.add_var(xi_cost[i], 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DualVars { w, xi })
}

/// `Aᵀξ − w (+ extra) = 0`, one row per forward variable.
fn stationarity_rows(
    lp: &mut LpProblem,
    fp: &ForwardProblem,
    v: &DualVars,
    extra: impl Fn(usize) -> Vec<(usize, f64)>,
) -> Result<(), InverseError> {
    for j in 0..fp.n_vars() {
        let mut coefs: Vec<(usize, f64)> = (0..fp.n_rows()).map(|i| (v.xi[i], fp.a[i][j])).collect();
        coefs.push((v.w[j], -1.0));
        coefs.extend(extra(j));
        lp.add_row(coefs, Sense::Eq, 0.0)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactFit {
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Strong-duality formulation: `Aᵀξ = w`, `wᵀx0 = bᵀξ`, `Σw = 1`,
/// `w, ξ ≥ 0`. `None` when `x0` is optimal for no such `w`.
pub fn io_pd_feasible(fp: &ForwardProblem, x0: &[f64]) -> Result<Option<ExactFit>, InverseError> {
    fp.check_point(x0)?;
    if !fp.is_feasible(x0, ACTIVE_TOL) {
        return Ok(None);
    }
    let mut lp = LpProblem::new();
    let v = add_dual_vars(&mut lp, fp, &vec![0.0; fp.n_rows()])?;
    stationarity_rows(&mut lp, fp, &v, |_| Vec::new())?;
    let mut gap: Vec<(usize, f64)> = v.w.iter().zip(x0).map(|(&c, &x)| (c, x)).collect();
    gap.extend(v.xi.iter().zip(&fp.b).map(|(&c, &b)| (c, -b)));
    lp.add_row(gap, Sense::Eq, 0.0)?;
    lp.add_row(v.w.iter().map(|&c| (c, 1.0)).collect(), Sense::Eq, 1.0)?;
    extract_exact(&lp, &v)
}

/// Complementary-slackness formulation: `Aᵀξ = w`, `Σw = 1`, `w, ξ ≥ 0` and
/// `ξ_i = 0` on every row with slack above [`ACTIVE_TOL`].
pub fn io_kkt_feasible(fp: &ForwardProblem, x0: &[f64]) -> Result<Option<ExactFit>, InverseError> {
    fp.check_point(x0)?;
    if !fp.is_feasible(x0, ACTIVE_TOL) {
        return Ok(None);
    }
    let mut lp = LpProblem::new();
    let v = add_dual_vars(&mut lp, fp, &vec![0.0; fp.n_rows()])?;
    for (i, s) in fp.slacks(x0).into_iter().enumerate() {
        if s > ACTIVE_TOL {
            lp.set_bounds(v.xi[i], 0.0, 0.0)?;
        }
    }
    stationarity_rows(&mut lp, fp, &v, |_| Vec::new())?;
    lp.add_row(v.w.iter().map(|&c| (c, 1.0)).collect(), Sense::Eq, 1.0)?;
    extract_exact(&lp, &v)
}

fn extract_exact(lp: &LpProblem, v: &DualVars) -> Result<Option<ExactFit>, InverseError> {
    let sol = solve_lp(lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    Ok(Some(ExactFit {
        w: v.w.iter().map(|&c| sol.primal[c]).collect(),
        xi: v.xi.iter().map(|&c| sol.primal[c]).collect(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GioPdFit {
    /// Cost vector, rescaled to `Σw = 1`.
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    /// Perturbation making `x0 + ε` optimal for `w`.
    pub epsilon: Vec<f64>,
    /// `‖ε‖₁`.
    pub residual: f64,
    /// Coordinate carrying the largest share of the perturbation.
    pub coordinate: usize,
}

/// Strong-duality formulation with an `ℓ1` perturbation:
/// minimize `‖ε‖₁` such that `x0 + ε` is feasible and optimal for some
/// `w ≥ 0`.
///
/// The joint problem is bilinear, so it is searched over a finite set of
/// candidate cost vectors: for every coordinate `j`, the `w` minimizing the
/// duality gap `wᵀx0 − bᵀξ` with `w_j = 1 ≥ w_l`, plus every nonnegative
/// constraint normal. For each candidate the exact distance from `x0` to its
/// optimal face is an LP. `None` only when every candidate leaves the forward
/// problem unbounded.
pub fn gio_pd_solve(fp: &ForwardProblem, x0: &[f64]) -> Result<Option<GioPdFit>, InverseError> {
    fp.check_point(x0)?;
    let n = fp.n_vars();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut lp = LpProblem::new();
        let neg_b: Vec<f64> = fp.b.iter().map(|b| -b).collect();
        let v = add_dual_vars(&mut lp, fp, &neg_b)?;
        for (l, &c) in v.w.iter().enumerate() {
            lp.set_cost(c, x0[l]);
            let lower = if l == j { 1.0 } else { 0.0 };
            lp.set_bounds(c, lower, 1.0)?;
        }
        stationarity_rows(&mut lp, fp, &v, |_| Vec::new())?;
        let sol = solve_lp(&lp)?;
        if sol.is_optimal() {
            candidates.push(v.w.iter().map(|&c| sol.primal[c]).collect());
        }
    }
    for row in &fp.a {
        if row.iter().all(|&a| a >= 0.0) && row.iter().any(|&a| a > 0.0) {
            candidates.push(row.clone());
        }
    }

    let mut best: Option<GioPdFit> = None;
    for w in candidates {
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let Some(fit) = distance_to_optimal_face(fp, x0, &w)? else {
            continue;
        };
        if best.as_ref().map_or(true, |b| fit.residual < b.residual - 1e-12) {
            best = Some(fit);
        }
    }
    Ok(best)
}

/// `min ‖ε‖₁  s.t.  A(x0 + ε) ≥ b,  wᵀ(x0 + ε) = z*(w)`.
fn distance_to_optimal_face(fp: &ForwardProblem, x0: &[f64], w: &[f64]) -> Result<Option<GioPdFit>, InverseError> {
    let mut forward = LpProblem::new();
    for &c in w {
        forward.add_var(c, f64::NEG_INFINITY, f64::INFINITY)?;
    }
    for (row, &b) in fp.a.iter().zip(&fp.b) {
        forward.add_row(row.iter().copied().enumerate().collect(), Sense::Ge, b)?;
    }
    let fwd = solve_lp(&forward)?;
    if !fwd.is_optimal() {
        return Ok(None);
    }
    let n = fp.n_vars();
    let mut lp = LpProblem::new();
    let plus = (0..n)
        .map(|_| lp.add_var(1.0, 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>, _>>()?;
    let minus = (0..n)
        .map(|_| lp.add_var(1.0, 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>, _>>()?;
    let shifted = |coefs: &[f64]| -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = plus.iter().zip(coefs).map(|(&c, &a)| (c, a)).collect();
        out.extend(minus.iter().zip(coefs).map(|(&c, &a)| (c, -a)));
        out
    };
    for (row, s) in fp.a.iter().zip(fp.slacks(x0)) {
        lp.add_row(shifted(row), Sense::Ge, -s)?;
    }
    let cost_at_x0: f64 = w.iter().zip(x0).map(|(a, b)| a * b).sum();
    lp.add_row(shifted(w), Sense::Eq, fwd.objective - cost_at_x0)?;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let epsilon: Vec<f64> = (0..n).map(|j| sol.primal[plus[j]] - sol.primal[minus[j]]).collect();
    let coordinate = (0..n)
        .max_by(|&a, &b| epsilon[a].abs().total_cmp(&epsilon[b].abs()))
        .unwrap_or(0);
    Ok(Some(GioPdFit {
        w: w.to_vec(),
        xi: fwd.row_prices.clone(),
        residual: epsilon.iter().map(|e| e.abs()).sum(),
        epsilon,
        coordinate,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GioKktFit {
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    /// `w − Aᵀξ`.
    pub eps_stat: Vec<f64>,
    /// `ξ_i (b_i − a_i x0)`, one entry per row.
    pub eps_comp: Vec<f64>,
    /// `‖ε_stat‖₁ + ‖ε_comp‖₁`.
    pub objective: f64,
}

/// KKT-residual formulation with `ℓ1` norms for a primal-feasible `x0`:
/// minimize `‖w − Aᵀξ‖₁ + ‖D(ξ)(b − Ax0)‖₁` over `Σw = 1`, `w, ξ ≥ 0`.
/// With `x0` fixed the complementarity term is `Σ ξ_i s_i`, which is linear.
/// `None` when `x0` is infeasible.
pub fn gio_kkt_solve(fp: &ForwardProblem, x0: &[f64]) -> Result<Option<GioKktFit>, InverseError> {
    fp.check_point(x0)?;
    if !fp.is_feasible(x0, ACTIVE_TOL) {
        return Ok(None);
    }
    let slack: Vec<f64> = fp.slacks(x0).into_iter().map(|s| s.max(0.0)).collect();
    let mut lp = LpProblem::new();
    let v = add_dual_vars(&mut lp, fp, &slack)?;
    let plus = (0..fp.n_vars())
        .map(|_| lp.add_var(1.0, 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>, _>>()?;
    let minus = (0..fp.n_vars())
        .map(|_| lp.add_var(1.0, 0.0, f64::INFINITY))
        .collect::<Result<Vec<_>, _>>()?;
    // Aᵀξ − w + ε⁺ − ε⁻ = 0, i.e. w − Aᵀξ = ε⁺ − ε⁻
    stationarity_rows(&mut lp, fp, &v, |j| vec![(plus[j], 1.0), (minus[j], -1.0)])?;
    lp.add_row(v.w.iter().map(|&c| (c, 1.0)).collect(), Sense::Eq, 1.0)?;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Ok(None);
    }
    let w: Vec<f64> = v.w.iter().map(|&c| sol.primal[c]).collect();
    let xi: Vec<f64> = v.xi.iter().map(|&c| sol.primal[c]).collect();
    let eps_stat: Vec<f64> = (0..fp.n_vars())
        .map(|j| w[j] - (0..fp.n_rows()).map(|i| fp.a[i][j] * xi[i]).sum::<f64>())
        .collect();
    let eps_comp: Vec<f64> = xi.iter().zip(&slack).map(|(x, s)| -x * s).collect();
    let objective = eps_stat.iter().map(|e| e.abs()).sum::<f64>() + eps_comp.iter().map(|e| e.abs()).sum::<f64>();
    Ok(Some(GioKktFit {
        w,
        xi,
        eps_stat,
        eps_comp,
        objective,
    }))
}
