//! Dense linear programming with exact dual and binding-status extraction.
//!
//! [`solve_lp`] runs a bounded-variable revised simplex and reports row duals as
//! nonnegative multipliers of the `≥`-canonical rows. [`solve_milp`] wraps it in
//! a depth-first branch and bound for problems with a handful of binaries.

mod error;
mod milp;
mod problem;
mod simplex;

pub use error::LpError;
pub use milp::{
    fix_binaries_and_resolve, solve_milp, solve_milp_with, MilpOptions, MilpProblem,
    MilpSolution, MilpStatus,
};
pub use problem::{LpProblem, Row, Sense};
pub use simplex::{
    certify, solve_lp, solve_lp_with_bounds, Certificate, LpSolution, LpStatus, BINDING_TOL,
    TOL_CS, TOL_FEAS, TOL_SD,
};
