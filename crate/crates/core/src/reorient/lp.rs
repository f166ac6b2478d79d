//! Small linear programs of the face graph, solved with microlp.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use crate::error::{Error, Result};

/// minimize cᵀx subject to equality rows, ≤ rows and variable bounds
/// (infinite bounds allowed).
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub equalities: Vec<(Vec<f64>, f64)>,
    pub inequalities: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    /// `n` free variables with a zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.equalities.push((row, rhs));
    }

    pub fn le(&mut self, row: Vec<f64>, rhs: f64) {
        self.inequalities.push((row, rhs));
    }

    pub fn bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.len();
        let check = |row: &Vec<f64>| row.len() == n && row.iter().all(|v| v.is_finite());
        if !self.equalities.iter().chain(&self.inequalities).all(|(r, b)| check(r) && b.is_finite())
            || self.lower.len() != n
            || self.upper.len() != n
        {
            return Err(Error::Solver("malformed linear program".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Ok(LpOutcome::Infeasible);
        }
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..n).map(|j| p.add_var(self.objective[j], (self.lower[j], self.upper[j]))).collect();
        let terms = |row: &[f64]| -> Vec<_> {
            row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (vars[j], *a)).collect()
        };
        for (row, rhs) in &self.equalities {
            p.add_constraint(terms(row), ComparisonOp::Eq, *rhs);
        }
        for (row, rhs) in &self.inequalities {
            p.add_constraint(terms(row), ComparisonOp::Le, *rhs);
        }
        match p.solve() {
            Ok(SolveOutcome::Solution(sol)) => {
                Ok(LpOutcome::Optimal { x: vars.iter().map(|v| sol[*v]).collect(), objective: sol.objective() })
            }
            Ok(SolveOutcome::Interrupted(_)) => Err(Error::Solver("linear program interrupted".into())),
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(Error::Solver(e.to_string())),
        }
    }
}
