//! Depth-first branch and bound over binary variables.

use log::debug;

use crate::error::LpError;
use crate::problem::LpProblem;
use crate::simplex::{solve_lp_with_bounds, LpSolution, LpStatus};

const INTEGRALITY_TOL: f64 = 1e-6;

/// An LP plus the set of columns restricted to {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub binaries: Vec<usize>,
}

impl MilpProblem {
    pub fn new(lp: LpProblem, binaries: Vec<usize>) -> Result<Self, LpError> {
        for &b in &binaries {
            if b >= lp.n_vars() {
                return Err(LpError::Index {
                    what: "binary variable",
                    index: b,
                    len: lp.n_vars(),
                });
            }
        }
        Ok(MilpProblem { lp, binaries })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    /// Nodes are pruned once their bound is within this relative gap of the incumbent.
    pub rel_gap: f64,
    pub node_limit: usize,
    /// Round the root relaxation up to seed an incumbent before branching.
    pub rounding_heuristic: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            rel_gap: 0.0,
            node_limit: 1_000_000,
            rounding_heuristic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    /// An incumbent exists but the node limit stopped the search early.
    NodeLimit,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent value of each binary, in the order of `MilpProblem::binaries`.
    pub assignment: Vec<bool>,
    /// LP solved with the binaries fixed at the incumbent.
    pub lp: Option<LpSolution>,
    pub objective: f64,
    pub nodes: usize,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        self.lp.is_some()
    }
}

pub fn solve_milp(problem: &MilpProblem) -> Result<MilpSolution, LpError> {
    solve_milp_with(problem, &MilpOptions::default())
}

/// Fixes every binary at `assignment` and solves the remaining LP.
pub fn fix_binaries_and_resolve(
    problem: &MilpProblem,
    assignment: &[bool],
) -> Result<LpSolution, LpError> {
    if assignment.len() != problem.binaries.len() {
        return Err(LpError::Dimension {
            what: "binary assignment",
            expected: problem.binaries.len(),
            got: assignment.len(),
        });
    }
    let mut lo = problem.lp.var_lower().to_vec();
    let mut hi = problem.lp.var_upper().to_vec();
    for (&j, &on) in problem.binaries.iter().zip(assignment) {
        let v = if on { 1.0 } else { 0.0 };
        if v < lo[j] || v > hi[j] {
            return Ok(infeasible_lp());
        }
        lo[j] = v;
        hi[j] = v;
    }
    solve_lp_with_bounds(&problem.lp, &lo, &hi)
}

fn infeasible_lp() -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        primal: Vec::new(),
        duals: Vec::new(),
        row_prices: Vec::new(),
        reduced_costs: Vec::new(),
        binding: Vec::new(),
        objective: f64::INFINITY,
        dual_objective: f64::INFINITY,
        iterations: 0,
    }
}

struct Incumbent {
    assignment: Vec<bool>,
    lp: LpSolution,
}

pub fn solve_milp_with(
    problem: &MilpProblem,
    options: &MilpOptions,
) -> Result<MilpSolution, LpError> {
    let mut base_lo: Vec<f64> = problem.lp.var_lower().to_vec();
    let mut base_hi: Vec<f64> = problem.lp.var_upper().to_vec();
    for &j in &problem.binaries {
        base_lo[j] = base_lo[j].max(0.0);
        base_hi[j] = base_hi[j].min(1.0);
    }
    let mut incumbent: Option<Incumbent> = None;
    // each node is a list of (binary position, fixed value)
    let mut stack: Vec<Vec<(usize, bool)>> = vec![Vec::new()];
    let mut nodes = 0usize;
    let mut hit_limit = false;

    while let Some(fixes) = stack.pop() {
        if nodes >= options.node_limit {
            hit_limit = true;
            break;
        }
        nodes += 1;
        let mut lo = base_lo.clone();
        let mut hi = base_hi.clone();
        let mut empty = false;
        for &(k, v) in &fixes {
            let j = problem.binaries[k];
            let val = if v { 1.0 } else { 0.0 };
            if val < lo[j] || val > hi[j] {
                empty = true;
            }
            lo[j] = val;
            hi[j] = val;
        }
        if empty {
            continue;
        }
        let relax = solve_lp_with_bounds(&problem.lp, &lo, &hi)?;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(LpError::Numerical(
                    "unbounded relaxation in branch and bound".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        if let Some(inc) = &incumbent {
            if !improves(relax.objective, inc.lp.objective, options.rel_gap) {
                continue;
            }
        }
        let fractional = problem.binaries.iter().position(|&j| {
            let v = relax.primal[j];
            (v - v.round()).abs() > INTEGRALITY_TOL
        });
        match fractional {
            None => {
                let assignment: Vec<bool> = problem
                    .binaries
                    .iter()
                    .map(|&j| relax.primal[j] > 0.5)
                    .collect();
                let fixed = fix_binaries_and_resolve(problem, &assignment)?;
                if fixed.is_optimal() {
                    let better = incumbent
                        .as_ref()
                        .map_or(true, |inc| improves(fixed.objective, inc.lp.objective, 0.0));
                    if better {
                        debug!("incumbent {} at node {nodes}", fixed.objective);
                        incumbent = Some(Incumbent {
                            assignment,
                            lp: fixed,
                        });
                    }
                }
            }
            Some(k) => {
                if nodes == 1 && options.rounding_heuristic && incumbent.is_none() {
                    let assignment: Vec<bool> = problem
                        .binaries
                        .iter()
                        .map(|&j| relax.primal[j] > INTEGRALITY_TOL)
                        .collect();
                    let fixed = fix_binaries_and_resolve(problem, &assignment)?;
                    if fixed.is_optimal() {
                        incumbent = Some(Incumbent {
                            assignment,
                            lp: fixed,
                        });
                    }
                }
                // up branch is popped first
                let mut down = fixes.clone();
                down.push((k, false));
                let mut up = fixes;
                up.push((k, true));
                stack.push(down);
                stack.push(up);
            }
        }
    }

    Ok(match incumbent {
        Some(inc) => MilpSolution {
            status: if hit_limit {
                MilpStatus::NodeLimit
            } else {
                MilpStatus::Optimal
            },
            objective: inc.lp.objective,
            assignment: inc.assignment,
            lp: Some(inc.lp),
            nodes,
        },
        None => MilpSolution {
            status: MilpStatus::Infeasible,
            assignment: Vec::new(),
            lp: None,
            objective: f64::INFINITY,
            nodes,
        },
    })
}

/// True when `candidate` beats `incumbent` by more than the allowed gap.
fn improves(candidate: f64, incumbent: f64, rel_gap: f64) -> bool {
    let scale = incumbent.abs().max(1.0);
    candidate < incumbent - (1e-9 * scale).max(rel_gap * incumbent.abs())
}
