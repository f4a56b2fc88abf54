//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min c.x  s.t.  A x >= b,  lo <= x <= hi` with finite bounds. Sizes
//! here are small and dense, so the whole tableau is kept in memory.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Covering-style LP: every constraint row reads `row . x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgramDense {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgramDense {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        if self.rhs.len() != self.constraints.len() {
            return Err(Error::InvalidInput(format!(
                "{} right-hand sides for {} constraints",
                self.rhs.len(),
                self.constraints.len()
            )));
        }
        if let Some(r) = self.constraints.iter().position(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!(
                "constraint {r} does not have {n} coefficients"
            )));
        }
        let finite = self
            .objective
            .iter()
            .chain(&self.rhs)
            .chain(self.constraints.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("LP contains non-finite coefficients".into()));
        }
        if let Some(k) = self
            .bounds
            .iter()
            .position(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidInput(format!(
                "variable {k} has invalid bounds {:?}",
                self.bounds[k]
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any constraint or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().zip(&self.rhs).map(|(row, b)| {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            (b - lhs).max(0.0)
        });
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// CPLEX-style LP text, readable by common external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::from("Minimize\n obj:");
        push_linear(&mut s, &self.objective);
        s.push_str("\nSubject To\n");
        for (r, (row, b)) in self.constraints.iter().zip(&self.rhs).enumerate() {
            let _ = write!(s, " c{r}:");
            push_linear(&mut s, row);
            let _ = writeln!(s, " >= {b}");
        }
        s.push_str("Bounds\n");
        for (k, (lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(s, " {lo} <= x{k} <= {hi}");
        }
        s.push_str("End\n");
        s
    }
}

fn push_linear(s: &mut String, coeffs: &[f64]) {
    let mut first = true;
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        if first && c >= 0.0 {
            let _ = write!(s, " {c} x{k}");
        } else {
            let _ = write!(s, " {sign} {} x{k}", c.abs());
        }
        first = false;
    }
    if first {
        s.push_str(" 0 x0");
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Smallest magnitude accepted as a pivot, and the reduced-cost threshold.
    pub pivot_tolerance: f64,
    /// Phase one residual above which the LP is declared infeasible.
    pub feasibility_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            pivot_tolerance: 1e-9,
            feasibility_tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpPoint {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1), rhs in the last column
    a: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, r: usize, e: usize, z: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.a[r * w + e];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for rr in 0..self.rows {
            if rr == r {
                continue;
            }
            let f = self.a[rr * w + e];
            if f != 0.0 {
                for (v, pv) in self.a[rr * w..(rr + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.a[rr * w + e] = 0.0;
            }
        }
        let f = z[e];
        if f != 0.0 {
            for (v, pv) in z.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            z[e] = 0.0;
        }
        self.basis[r] = e;
        self.iterations += 1;
    }

    /// Reduced-cost row `cost - cost_B B^-1 A`, with `-cost_B . rhs` in the last slot.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let w = self.cols + 1;
        let mut z = cost.to_vec();
        z.push(0.0);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (v, t) in z.iter_mut().zip(&self.a[r * w..(r + 1) * w]) {
                    *v -= cb * t;
                }
            }
        }
        z
    }

    /// Bland's rule iterations until optimality. Columns with `allowed[c] == false` never enter.
    fn optimize(&mut self, z: &mut [f64], allowed: &[bool], opts: &SimplexOptions, phase: u8) -> Result<()> {
        let tol = opts.pivot_tolerance;
        loop {
            let Some(e) = (0..self.cols).find(|&c| allowed[c] && z[c] < -tol) else {
                return Ok(());
            };
            if self.iterations >= opts.max_iterations {
                return Err(Error::Solver(format!(
                    "iteration cap {} reached in phase {phase} ({} rows, {} columns, objective {})",
                    opts.max_iterations, self.rows, self.cols, -z[self.cols]
                )));
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.at(r, e);
                if coef > tol {
                    let ratio = self.rhs(r).max(0.0) / coef;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Solver(format!(
                    "LP is unbounded along column {e} in phase {phase}"
                )));
            };
            self.pivot(r, e, z);
        }
    }
}

/// Solves the LP to optimality; returned values are clamped into their bounds.
pub fn solve_lp(lp: &LinearProgramDense) -> Result<LpPoint> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgramDense, opts: &SimplexOptions) -> Result<LpPoint> {
    lp.validate()?;
    let n = lp.n_vars();
    let k = lp.n_constraints();
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let width: Vec<f64> = lp.bounds.iter().map(|b| b.1 - b.0).collect();

    // shifted right-hand sides for y = x - lo
    let shifted: Vec<f64> = lp
        .constraints
        .iter()
        .zip(&lp.rhs)
        .map(|(row, b)| b - row.iter().zip(&lo).map(|(a, l)| a * l).sum::<f64>())
        .collect();
    let needs_artificial: Vec<bool> = shifted.iter().map(|&b| b > 0.0).collect();
    let n_art = needs_artificial.iter().filter(|&&x| x).count();

    // columns: y (n) | surplus/slack per constraint (k) | bound slacks (n) | artificials
    let cols = n + k + n + n_art;
    let rows = k + n;
    let w = cols + 1;
    let mut a = vec![0.0; rows * w];
    let mut basis = vec![0; rows];
    let mut art = n + k + n;
    for r in 0..k {
        let sign = if needs_artificial[r] { 1.0 } else { -1.0 };
        for c in 0..n {
            a[r * w + c] = sign * lp.constraints[r][c];
        }
        a[r * w + n + r] = -sign;
        a[r * w + cols] = sign * shifted[r];
        if needs_artificial[r] {
            a[r * w + art] = 1.0;
            basis[r] = art;
            art += 1;
        } else {
            basis[r] = n + r;
        }
    }
    for v in 0..n {
        let r = k + v;
        a[r * w + v] = 1.0;
        a[r * w + n + k + v] = 1.0;
        a[r * w + cols] = width[v];
        basis[r] = n + k + v;
    }
    let mut t = Tableau {
        rows,
        cols,
        a,
        basis,
        iterations: 0,
    };

    let first_art = n + k + n;
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        cost[first_art..].iter_mut().for_each(|c| *c = 1.0);
        let mut z = t.reduced_costs(&cost);
        let allowed = vec![true; cols];
        t.optimize(&mut z, &allowed, opts, 1)?;
        let residual = -z[cols];
        if residual > opts.feasibility_tolerance {
            return Err(Error::Solver(format!(
                "LP is infeasible (phase one residual {residual})"
            )));
        }
        // move zero-level artificials out of the basis where possible
        for r in 0..rows {
            if t.basis[r] >= first_art {
                if let Some(c) = (0..first_art).find(|&c| t.at(r, c).abs() > opts.pivot_tolerance) {
                    t.pivot(r, c, &mut z);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let mut z = t.reduced_costs(&cost);
    let allowed: Vec<bool> = (0..cols).map(|c| c < first_art).collect();
    t.optimize(&mut z, &allowed, opts, 2)?;

    let mut y = vec![0.0; n];
    for r in 0..rows {
        if t.basis[r] < n {
            y[t.basis[r]] = t.rhs(r);
        }
    }
    let x: Vec<f64> = y
        .iter()
        .zip(&lp.bounds)
        .map(|(yv, &(l, h))| (l + yv).clamp(l, h))
        .collect();
    Ok(LpPoint {
        objective: lp.evaluate(&x),
        x,
        iterations: t.iterations,
    })
}
