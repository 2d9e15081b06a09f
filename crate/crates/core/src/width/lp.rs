//! Dense two-phase simplex with Bland's rule. Variables are nonnegative;
//! the objective is maximized.

use std::fmt;

use crate::error::{Error, Result};

pub const LP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> Self {
        Constraint { coeffs, cmp, rhs }
    }

    fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    fn holds(&self, x: &[f64], tol: f64) -> bool {
        let v = self.lhs(x);
        match self.cmp {
            Cmp::Le => v <= self.rhs + tol,
            Cmp::Ge => v >= self.rhs - tol,
            Cmp::Eq => (v - self.rhs).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub num_vars: usize,
    /// Maximized.
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |&(j, a): &(usize, f64)| format!("{a:+} x{j}");
        let obj: Vec<String> = self.objective.iter().map(term).collect();
        writeln!(f, "maximize {}", obj.join(" "))?;
        for c in &self.constraints {
            let lhs: Vec<String> = c.coeffs.iter().map(term).collect();
            let op = match c.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            writeln!(f, "  {} {op} {}", lhs.join(" "), c.rhs)?;
        }
        write!(f, "  x >= 0 ({} variables)", self.num_vars)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    /// `duals[i]` prices constraint i; Σ duals·rhs equals `value`.
    Optimal { value: f64, x: Vec<f64>, duals: Vec<f64> },
    /// `x` is feasible and `x + λ·ray` stays feasible for all λ ≥ 0 while the
    /// objective grows without bound.
    Unbounded { x: Vec<f64>, ray: Vec<f64> },
    Infeasible,
}

struct Tableau {
    /// m constraint rows then the objective row; last column is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

enum Step {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Objective row holds reduced costs c_j − c_B B⁻¹ A_j; the rhs entry
    /// is minus the objective value.
    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (o, &a) in obj.iter_mut().zip(&self.rows[i]) {
                    *o -= cb * a;
                }
            }
        }
        self.rows[m] = obj;
    }

    /// Bland's rule: lowest-index improving column, lowest-index basic
    /// variable among tied ratios.
    fn optimize(&mut self, can_enter: impl Fn(usize) -> bool, max_iter: usize) -> Result<Step> {
        let m = self.m();
        for _ in 0..max_iter {
            let Some(c) = (0..self.cols).find(|&j| can_enter(j) && self.rows[m][j] > LP_TOL) else {
                return Ok(Step::Optimal);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.rows[i][c];
                if a > LP_TOL {
                    let ratio = self.rows[i][self.cols] / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => ratio < br - LP_TOL || (ratio <= br + LP_TOL && self.basis[i] < bb),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                None => return Ok(Step::Unbounded(c)),
                Some((_, r, _)) => self.pivot(r, c),
            }
        }
        Err(Error::Solver(format!("simplex did not finish within {max_iter} pivots")))
    }

    fn point(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rows[i][self.cols];
            }
        }
        x
    }
}

/// Solves `lp`; the returned point is re-checked against every constraint.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.num_vars;
    let m = lp.constraints.len();
    // Column layout: structural | one slack/surplus per inequality | artificials.
    let mut slack_col = vec![None; m];
    let mut next = n;
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.cmp != Cmp::Eq {
            slack_col[i] = Some(next);
            next += 1;
        }
    }
    // Rows are normalized to rhs ≥ 0; `sign` remembers flips.
    let mut sign = vec![1.0; m];
    let mut needs_art = vec![false; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.rhs < 0.0 {
            sign[i] = -1.0;
        }
        let cmp = match (c.cmp, sign[i] < 0.0) {
            (Cmp::Le, true) => Cmp::Ge,
            (Cmp::Ge, true) => Cmp::Le,
            (k, _) => k,
        };
        needs_art[i] = cmp != Cmp::Le;
    }
    let mut art_col = vec![None; m];
    for i in 0..m {
        if needs_art[i] {
            art_col[i] = Some(next);
            next += 1;
        }
    }
    let cols = next;
    let mut rows = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            if j >= n {
                return Err(Error::Solver(format!("constraint {i} uses variable {j} of {n}\n{lp}")));
            }
            rows[i][j] += sign[i] * a;
        }
        if let Some(s) = slack_col[i] {
            let unit = if c.cmp == Cmp::Le { 1.0 } else { -1.0 };
            rows[i][s] = sign[i] * unit;
        }
        rows[i][cols] = sign[i] * c.rhs;
        match art_col[i] {
            Some(a) => {
                rows[i][a] = 1.0;
                basis[i] = a;
            }
            None => basis[i] = slack_col[i].expect("a ≤ row has a slack"),
        }
    }
    let mut t = Tableau { rows, basis, cols };
    let max_iter = 50 * (cols + m + 10);
    let mut art_mask = vec![false; cols];
    for a in art_col.iter().flatten() {
        art_mask[*a] = true;
    }
    let is_art = |j: usize| art_mask[j];

    if art_col.iter().any(Option::is_some) {
        let mut cost = vec![0.0; cols];
        for a in art_col.iter().flatten() {
            cost[*a] = -1.0;
        }
        t.set_objective(&cost);
        t.optimize(|_| true, max_iter)?;
        if -t.rows[m][cols] < -1e-7 {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if is_art(t.basis[i]) {
                if let Some(j) = (0..cols).find(|&j| !is_art(j) && t.rows[i][j].abs() > LP_TOL) {
                    t.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    for &(j, a) in &lp.objective {
        cost[j] += a;
    }
    t.set_objective(&cost);
    let step = t.optimize(|j| !is_art(j), max_iter)?;
    let x = t.point(n);
    for (i, c) in lp.constraints.iter().enumerate() {
        if !c.holds(&x, 1e-7) {
            return Err(Error::Solver(format!(
                "simplex point violates constraint {i} by {:e}\n{lp}",
                c.lhs(&x) - c.rhs
            )));
        }
    }
    match step {
        Step::Unbounded(c) => {
            let mut ray = vec![0.0; cols];
            ray[c] = 1.0;
            for i in 0..m {
                ray[t.basis[i]] -= t.rows[i][c];
            }
            ray.truncate(n);
            Ok(LpOutcome::Unbounded { x, ray })
        }
        Step::Optimal => {
            let value = lp.objective.iter().map(|&(j, a)| a * x[j]).sum();
            // y_i from the reduced cost of the row's slack or artificial.
            let duals = (0..m)
                .map(|i| {
                    match (slack_col[i], art_col[i]) {
                        (_, Some(a)) => -sign[i] * t.rows[m][a],
                        (Some(s), None) if lp.constraints[i].cmp == Cmp::Le => -t.rows[m][s],
                        (Some(s), None) => t.rows[m][s],
                        (None, None) => unreachable!("every row has a slack or an artificial"),
                    }
                })
                .collect();
            Ok(LpOutcome::Optimal { value, x, duals })
        }
    }
}
