//! Bounded-variable revised simplex.
//!
//! Every row `a·x (≤|≥|=) b` gets a logical variable `s` with `a·x + s = b`
//! whose bounds encode the relation. Rows whose starting residual falls outside
//! the logical's bounds get an artificial variable and phase one drives those
//! to zero. The basis inverse is kept dense and updated by elementary row
//! operations, with a fresh LU-based inverse every [`REFACTOR_EVERY`] pivots.
//!
//! Pricing is Dantzig's rule with lowest-index tie-breaking; after a run of
//! degenerate pivots the solver switches to Bland's rule until progress resumes.

use log::trace;
use nalgebra::DMatrix;

use crate::error::LpError;
use crate::problem::{LpProblem, Sense};

pub const TOL_FEAS: f64 = 1e-8;
pub const TOL_CS: f64 = 1e-8;
pub const TOL_SD: f64 = 1e-6;
/// Absolute slack below which a row counts as binding.
pub const BINDING_TOL: f64 = 1e-6;

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 40;
const PIVOT_TOL: f64 = 1e-9;
const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`].
///
/// `duals[r]` is the multiplier of row `r` after rewriting it in `≥` form, so it
/// is nonnegative for `≤` and `≥` rows and free for equalities. `row_prices[r]`
/// is the raw sensitivity `∂objective/∂rhs_r`. The two agree on `≥` and `=`
/// rows and differ in sign on `≤` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub row_prices: Vec<f64>,
    /// `cost_j − Σ_r row_prices_r a_rj`; zero for basic variables.
    pub reduced_costs: Vec<f64>,
    pub binding: Vec<bool>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        LpSolution {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            row_prices: Vec::new(),
            reduced_costs: Vec::new(),
            binding: Vec::new(),
            objective,
            dual_objective: objective,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Optimality certificate residuals of a solution against its problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub max_violation: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    pub dual_sign_violation: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.max_violation <= TOL_FEAS
            && self.complementarity <= TOL_CS
            && self.duality_gap <= TOL_SD
            && self.dual_sign_violation == 0.0
    }
}

/// Recomputes feasibility, complementary slackness, strong duality and dual
/// signs from scratch. Complementarity is measured on scaled slacks the same
/// way [`LpProblem::max_violation`] scales rows.
pub fn certify(problem: &LpProblem, sol: &LpSolution) -> Certificate {
    let x = &sol.primal;
    let mut cs: f64 = 0.0;
    let mut sign: f64 = 0.0;
    for (r, row) in problem.rows().iter().enumerate() {
        let slack = row.activity(x) - row.rhs;
        let scale = row
            .coefs
            .iter()
            .map(|&(j, a)| (a * x[j]).abs())
            .fold(row.rhs.abs().max(1.0), f64::max);
        let dual = sol.duals[r];
        if row.sense != Sense::Eq {
            cs = cs.max((dual * slack).abs() / scale.max(dual.abs().max(1.0)));
            if dual < 0.0 {
                sign = sign.max(-dual);
            }
        }
    }
    let (lo, hi) = (problem.var_lower(), problem.var_upper());
    for j in 0..x.len() {
        let d = sol.reduced_costs[j];
        let dist = if d > 0.0 { x[j] - lo[j] } else { hi[j] - x[j] };
        // reduced costs at round-off level carry no complementarity content
        // and would turn an infinite bound distance into an infinite residual
        if d.abs() > TOL_CS {
            let scale = x[j].abs().max(1.0) * d.abs().max(1.0);
            cs = cs.max((d * dist).abs() / scale);
        }
    }
    let obj = sol.objective;
    let gap = (obj - sol.dual_objective).abs() / obj.abs().max(1.0);
    Certificate {
        max_violation: problem.max_violation(x),
        complementarity: cs,
        duality_gap: gap,
        dual_sign_violation: sign,
    }
}

/// Solves the LP with the bounds stored in the problem.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with_bounds(problem, problem.var_lower(), problem.var_upper())
}

/// Solves the LP with caller-supplied variable bounds (used by branch and bound).
pub fn solve_lp_with_bounds(
    problem: &LpProblem,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution, LpError> {
    let n = problem.n_vars();
    for (what, v) in [("lower bounds", lower), ("upper bounds", upper)] {
        if v.len() != n {
            return Err(LpError::Dimension {
                what,
                expected: n,
                got: v.len(),
            });
        }
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            return Err(LpError::InvalidBounds {
                var: j,
                lower: lower[j],
                upper: upper[j],
            });
        }
    }
    let mut s = Simplex::new(problem, lower, upper);
    if s.has_artificials() {
        s.set_phase_one_costs();
        match s.run()? {
            Phase::Optimal => {}
            Phase::Unbounded => {
                return Err(LpError::Numerical("phase one reported unbounded".into()))
            }
        }
        let infeas: f64 = (s.first_art..s.nt()).map(|j| s.x[j].abs()).sum();
        let bscale = problem.rows().iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
        if infeas > TOL_FEAS * bscale {
            trace!("phase one ended with infeasibility {infeas:e}");
            return Ok(LpSolution::without_point(LpStatus::Infeasible, s.iterations));
        }
        s.retire_artificials()?;
    }
    s.set_phase_two_costs(problem.cost());
    match s.run()? {
        Phase::Optimal => s.extract(problem),
        Phase::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded, s.iterations)),
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Simplex {
    m: usize,
    n: usize,
    first_art: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    /// Row-major dense basis inverse.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    dual_tol: f64,
    max_iterations: usize,
}

impl Simplex {
    fn new(problem: &LpProblem, lower: &[f64], upper: &[f64]) -> Self {
        let m = problem.n_rows();
        let n = problem.n_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in problem.rows().iter().enumerate() {
            for &(j, a) in &row.coefs {
                cols[j].push((i, a));
            }
        }
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                if lo[j].is_finite() {
                    lo[j]
                } else if hi[j].is_finite() {
                    hi[j]
                } else {
                    0.0
                }
            })
            .collect();
        let b: Vec<f64> = problem.rows().iter().map(|r| r.rhs).collect();
        let mut resid = b.clone();
        for (j, col) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    resid[i] -= a * x[j];
                }
            }
        }
        // logical variables
        for (i, row) in problem.rows().iter().enumerate() {
            cols.push(vec![(i, 1.0)]);
            let (l, h) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
            x.push(0.0);
        }
        let first_art = n + m;
        let mut basis = vec![0; m];
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let s = n + i;
            let r = resid[i];
            if r >= lo[s] && r <= hi[s] {
                x[s] = r;
                basis[i] = s;
                binv[i * m + i] = 1.0;
            } else {
                let clamped = r.clamp(lo[s], hi[s]);
                x[s] = clamped;
                let sign = if r > clamped { 1.0 } else { -1.0 };
                cols.push(vec![(i, sign)]);
                lo.push(0.0);
                hi.push(f64::INFINITY);
                x.push((r - clamped).abs());
                basis[i] = cols.len() - 1;
                binv[i * m + i] = sign;
            }
        }
        let nt = cols.len();
        let mut pos = vec![NONBASIC; nt];
        for (i, &v) in basis.iter().enumerate() {
            pos[v] = i;
        }
        let cscale = problem.cost().iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        Simplex {
            m,
            n,
            first_art,
            cols,
            lo,
            hi,
            cost: vec![0.0; nt],
            x,
            b,
            basis,
            pos,
            binv,
            iterations: 0,
            since_refactor: 0,
            dual_tol: 1e-9 * cscale,
            max_iterations: 50 * (m + n) + 10_000,
        }
    }

    fn nt(&self) -> usize {
        self.cols.len()
    }

    fn has_artificials(&self) -> bool {
        self.nt() > self.first_art
    }

    fn set_phase_one_costs(&mut self) {
        let nt = self.nt();
        self.cost = vec![0.0; nt];
        for j in self.first_art..nt {
            self.cost[j] = 1.0;
        }
        self.dual_tol = 1e-11;
    }

    fn set_phase_two_costs(&mut self, cost: &[f64]) {
        let nt = self.nt();
        self.cost = vec![0.0; nt];
        self.cost[..self.n].copy_from_slice(cost);
        let cscale = cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        self.dual_tol = 1e-9 * cscale;
    }

    fn btran(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let col = &self.cols[j];
        (0..m)
            .map(|i| {
                let row = &self.binv[i * m..(i + 1) * m];
                col.iter().map(|&(r, a)| row[r] * a).sum()
            })
            .collect()
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    /// Picks an entering variable and direction (+1 increase, −1 decrease).
    fn price(&self, y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.nt() {
            if self.pos[j] != NONBASIC || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced_cost(j, y);
            let at_lo = self.x[j] <= self.lo[j];
            let at_hi = self.x[j] >= self.hi[j];
            let dir = if d < -self.dual_tol && !at_hi {
                1.0
            } else if d > self.dual_tol && !at_lo {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            let score = d.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run(&mut self) -> Result<Phase, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY.max(self.m) {
                self.refactor()?;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let y = self.btran();
            let Some((q, dir)) = self.price(&y, bland) else {
                return Ok(Phase::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            let alpha = self.ftran(q);
            // ratio test
            let own = self.hi[q] - self.lo[q];
            let mut t_best = if own.is_finite() { own } else { f64::INFINITY };
            let mut leave: Option<(usize, bool)> = None;
            for (i, &al) in alpha.iter().enumerate() {
                if al.abs() <= PIVOT_TOL {
                    continue;
                }
                let bv = self.basis[i];
                let delta = -dir * al;
                let (ratio, to_upper) = if delta < 0.0 {
                    if !self.lo[bv].is_finite() {
                        continue;
                    }
                    ((self.x[bv] - self.lo[bv]).max(0.0) / -delta, false)
                } else {
                    if !self.hi[bv].is_finite() {
                        continue;
                    }
                    ((self.hi[bv] - self.x[bv]).max(0.0) / delta, true)
                };
                let tie = if t_best.is_finite() {
                    1e-12 * t_best.abs().max(1.0)
                } else {
                    0.0
                };
                let better = if ratio < t_best - tie {
                    true
                } else if ratio <= t_best + tie {
                    match leave {
                        None => false,
                        Some((li, _)) => {
                            if bland {
                                bv < self.basis[li]
                            } else {
                                al.abs() > alpha[li].abs()
                            }
                        }
                    }
                } else {
                    false
                };
                if better {
                    t_best = ratio;
                    leave = Some((i, to_upper));
                }
            }
            if t_best == f64::INFINITY {
                return Ok(Phase::Unbounded);
            }
            let step = dir * t_best;
            if step != 0.0 {
                self.x[q] += step;
                for (i, &al) in alpha.iter().enumerate() {
                    if al != 0.0 {
                        let bv = self.basis[i];
                        self.x[bv] -= step * al;
                    }
                }
            }
            if t_best <= 1e-11 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match leave {
                None => {
                    // bound flip
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some((r, to_upper)) => {
                    let lv = self.basis[r];
                    self.x[lv] = if to_upper { self.hi[lv] } else { self.lo[lv] };
                    self.pivot(r, q, &alpha);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let lv = self.basis[r];
        self.pos[lv] = NONBASIC;
        self.basis[r] = q;
        self.pos[q] = r;
        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (row_r, after) = rest.split_at_mut(m);
        for v in row_r.iter_mut() {
            *v /= piv;
        }
        for (i, chunk) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (a, b) in chunk.iter_mut().zip(row_r.iter()) {
                    *a -= f * b;
                }
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (a, b) in chunk.iter_mut().zip(row_r.iter()) {
                    *a -= f * b;
                }
            }
        }
        self.since_refactor += 1;
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (i, &v) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[v] {
                bmat[(r, i)] = a;
            }
        }
        let inv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| LpError::Numerical("singular basis at refactorization".into()))?;
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = inv[(i, k)];
            }
        }
        // recompute basic values from nonbasic ones
        let mut rhs = self.b.clone();
        for j in 0..self.nt() {
            if self.pos[j] == NONBASIC && self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    rhs[r] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
        Ok(())
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    fn retire_artificials(&mut self) -> Result<(), LpError> {
        let m = self.m;
        for j in self.first_art..self.nt() {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if self.pos[j] == NONBASIC {
                self.x[j] = 0.0;
            }
        }
        for r in 0..m {
            let bv = self.basis[r];
            if bv < self.first_art {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..self.first_art {
                if self.pos[j] != NONBASIC {
                    continue;
                }
                let v: f64 = self.cols[j].iter().map(|&(i, a)| row[i] * a).sum();
                if v.abs() > 1e-7 && pick.map_or(true, |(_, p)| v.abs() > p.abs()) {
                    pick = Some((j, v));
                }
            }
            if let Some((j, _)) = pick {
                let alpha = self.ftran(j);
                self.x[bv] = 0.0;
                self.pivot(r, j, &alpha);
            }
        }
        self.refactor()
    }

    fn extract(&mut self, problem: &LpProblem) -> Result<LpSolution, LpError> {
        self.refactor()?;
        let y = self.btran();
        let n = self.n;
        let primal: Vec<f64> = self.x[..n].to_vec();
        let mut reduced_costs = vec![0.0; n];
        for (j, rc) in reduced_costs.iter_mut().enumerate() {
            if self.pos[j] == NONBASIC {
                *rc = self.reduced_cost(j, &y);
            }
        }
        let mut duals = Vec::with_capacity(self.m);
        let mut binding = Vec::with_capacity(self.m);
        let sign_tol = 1e-7 * problem.cost().iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        for (r, row) in problem.rows().iter().enumerate() {
            let d = match row.sense {
                Sense::Ge => y[r],
                Sense::Le => -y[r],
                Sense::Eq => y[r],
            };
            let d = if row.sense != Sense::Eq && d < 0.0 {
                if d < -sign_tol {
                    return Err(LpError::Numerical(format!(
                        "dual of row {r} has wrong sign ({d:e})"
                    )));
                }
                0.0
            } else {
                d
            };
            duals.push(d);
            let slack = row.activity(&primal) - row.rhs;
            binding.push(row.sense == Sense::Eq || slack.abs() <= BINDING_TOL);
        }
        let objective = problem.objective_value(&primal);
        let dual_objective = y
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + reduced_costs
                .iter()
                .zip(&primal)
                .map(|(d, x)| if *d != 0.0 { d * x } else { 0.0 })
                .sum::<f64>();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            primal,
            duals,
            row_prices: y,
            reduced_costs,
            binding,
            objective,
            dual_objective,
            iterations: self.iterations,
        })
    }
}
