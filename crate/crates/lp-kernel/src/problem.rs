use nalgebra::DMatrix;

use crate::error::LpError;

/// Relation of a constraint row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A constraint row stored sparsely as `(column, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `min cost·x` subject to row relations and per-variable bounds.
///
/// Bounds may be infinite. Rows are kept sparse; [`LpProblem::constraint_matrix`]
/// materializes the dense matrix when one is wanted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a problem from dense data, validating every dimension.
    pub fn from_dense(
        cost: Vec<f64>,
        matrix: &[Vec<f64>],
        rhs: Vec<f64>,
        senses: Vec<Sense>,
        var_lower: Vec<f64>,
        var_upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = cost.len();
        if rhs.len() != matrix.len() {
            return Err(LpError::Dimension {
                what: "rhs",
                expected: matrix.len(),
                got: rhs.len(),
            });
        }
        if senses.len() != matrix.len() {
            return Err(LpError::Dimension {
                what: "senses",
                expected: matrix.len(),
                got: senses.len(),
            });
        }
        for (what, v) in [("var_lower", &var_lower), ("var_upper", &var_upper)] {
            if v.len() != n {
                return Err(LpError::Dimension {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let mut lp = LpProblem::new();
        for j in 0..n {
            lp.add_var(cost[j], var_lower[j], var_upper[j])?;
        }
        for ((row, sense), b) in matrix.iter().zip(senses).zip(rhs) {
            if row.len() != n {
                return Err(LpError::Dimension {
                    what: "constraint_matrix row",
                    expected: n,
                    got: row.len(),
                });
            }
            let coefs = row
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != 0.0)
                .map(|(j, a)| (j, *a))
                .collect();
            lp.add_row(coefs, sense, b)?;
        }
        Ok(lp)
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> Result<usize, LpError> {
        if !cost.is_finite() || lower.is_nan() || upper.is_nan() {
            return Err(LpError::NonFinite("variable"));
        }
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::InvalidBounds {
                var: self.cost.len(),
                lower,
                upper,
            });
        }
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        Ok(self.cost.len() - 1)
    }

    /// Adds a constraint row and returns its index. Repeated columns are summed.
    pub fn add_row(
        &mut self,
        coefs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, LpError> {
        if !rhs.is_finite() {
            return Err(LpError::NonFinite("rhs"));
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        let mut sorted = coefs;
        sorted.sort_by_key(|&(j, _)| j);
        for (j, a) in sorted {
            if j >= self.cost.len() {
                return Err(LpError::Index {
                    what: "row coefficient column",
                    index: j,
                    len: self.cost.len(),
                });
            }
            if !a.is_finite() {
                return Err(LpError::NonFinite("constraint coefficient"));
            }
            match merged.last_mut() {
                Some((k, v)) if *k == j => *v += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            coefs: merged,
            sense,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if var >= self.cost.len() {
            return Err(LpError::Index {
                what: "variable",
                index: var,
                len: self.cost.len(),
            });
        }
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(LpError::InvalidBounds { var, lower, upper });
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        self.rows[row].rhs = rhs;
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn var_lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn var_upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rhs).collect()
    }

    pub fn senses(&self) -> Vec<Sense> {
        self.rows.iter().map(|r| r.sense).collect()
    }

    pub fn constraint_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows.len(), self.cost.len());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in &row.coefs {
                a[(i, j)] = v;
            }
        }
        a
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest scaled violation of any row or bound at `x`.
    ///
    /// A row's violation is divided by `max(1, |rhs|, max_j |a_j x_j|)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let act = row.activity(x);
            let scale = row
                .coefs
                .iter()
                .map(|&(j, a)| (a * x[j]).abs())
                .fold(row.rhs.abs().max(1.0), f64::max);
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v.max(0.0) / scale);
        }
        for j in 0..x.len() {
            let scale = x[j].abs().max(1.0);
            worst = worst.max((self.lower[j] - x[j]).max(0.0) / scale);
            worst = worst.max((x[j] - self.upper[j]).max(0.0) / scale);
        }
        worst
    }
}
