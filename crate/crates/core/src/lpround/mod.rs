//! LP relaxation of each class's prize-collecting set cover, followed by
//! randomized rounding.
//!
//! For class `l` the relaxation has one variable per candidate (`alpha`) and
//! one per class point (`xi`), all in `[0, 1]`, with a covering row
//! `sum_{j covers i} alpha_j + xi_i >= 1` per point. Rounding draws every
//! variable as an independent Bernoulli of its LP value, ORs the draws over
//! `ceil(2 ln |X_l|)` rounds and accepts once the union is a feasible
//! cover-or-abstain solution within `2 ln |X_l|` times the LP optimum.
//! A failed pass is retried with a fresh stream.

mod simplex;

pub use simplex::{solve_lp, solve_lp_with, LinearProgramDense, LpPoint, SimplexOptions};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{evaluate_solution, PcscSubproblem, PrototypeProblem, PrototypeSolution};
use crate::error::{Error, Result};
use crate::rng;

/// Absolute slack allowed when comparing a rounded objective with its bound.
pub const BOUND_TOLERANCE: f64 = 1e-7;

/// LP values this close to 0 or 1 are snapped before use as probabilities.
const SNAP_TOLERANCE: f64 = 1e-9;

/// Relaxation of `sub`: candidate variables first, then one slack per target point.
pub fn build_lp(sub: &PcscSubproblem) -> LinearProgramDense {
    let m = sub.m_candidates();
    let t = sub.target_points.len();
    let mut objective = sub.costs();
    objective.extend(std::iter::repeat_n(1.0, t));
    let mut constraints = vec![vec![0.0; m + t]; t];
    for (j, covers) in sub.covers_in_class.iter().enumerate() {
        for &i in covers {
            let k = sub.local_index(i).expect("covers_in_class holds class points");
            constraints[k][j] = 1.0;
        }
    }
    for (k, row) in constraints.iter_mut().enumerate() {
        row[m + k] = 1.0;
    }
    LinearProgramDense {
        objective,
        constraints,
        rhs: vec![1.0; t],
        bounds: vec![(0.0, 1.0); m + t],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    /// Fractional candidate values, in `[0, 1]`.
    pub alpha: Vec<f64>,
    /// Fractional slack per target point, in `[0, 1]`.
    pub xi: Vec<f64>,
    pub opt_value: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// Splits a solved point of `build_lp(sub)` into candidate and slack parts.
    pub fn from_point(point: LpPoint, m_candidates: usize) -> Self {
        let snap = |v: f64| {
            if v < SNAP_TOLERANCE {
                0.0
            } else if v > 1.0 - SNAP_TOLERANCE {
                1.0
            } else {
                v
            }
        };
        let mut values: Vec<f64> = point.x.into_iter().map(snap).collect();
        let xi = values.split_off(m_candidates);
        Self {
            alpha: values,
            xi,
            opt_value: point.objective,
            iterations: point.iterations,
        }
    }
}

pub fn solve_relaxation(sub: &PcscSubproblem) -> Result<LpSolution> {
    let point = solve_lp(&build_lp(sub))?;
    Ok(LpSolution::from_point(point, sub.m_candidates()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingOptions {
    pub max_attempts: usize,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        Self { max_attempts: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    /// Candidates drawn at least once, ascending.
    pub selected: Vec<usize>,
    /// Global indices of target points whose slack was drawn.
    pub abstained: Vec<usize>,
    /// Rounds used in the accepted attempt.
    pub rounds_used: usize,
    /// Attempts made, including the accepted one.
    pub attempts: usize,
    /// `sum of selected costs + abstained count`.
    pub objective: f64,
    /// `2 ln |X_l| * OPT_LP`, or `None` when `|X_l| = 1`.
    pub bound: Option<f64>,
}

/// Number of rounds per attempt, `max(1, ceil(2 ln t))`.
pub fn rounds_for(targets: usize) -> usize {
    ((2.0 * (targets.max(1) as f64).ln()).ceil() as usize).max(1)
}

/// Randomized rounding of one class's LP solution.
///
/// Attempt `a` draws from the stream derived from `(seed, a)`; identical
/// seeds give identical outcomes.
pub fn randomized_round(
    lps: &LpSolution,
    sub: &PcscSubproblem,
    seed: u64,
    opts: &RoundingOptions,
) -> Result<RoundingOutcome> {
    let m = sub.m_candidates();
    let t = sub.target_points.len();
    if lps.alpha.len() != m || lps.xi.len() != t {
        return Err(Error::InvalidInput(format!(
            "LP solution has {}+{} values, subproblem needs {m}+{t}",
            lps.alpha.len(),
            lps.xi.len()
        )));
    }
    let rounds = rounds_for(t);
    let bound = (t > 1).then(|| 2.0 * (t as f64).ln() * lps.opt_value);

    // candidates covering each local target point
    let mut coverers = vec![Vec::new(); t];
    for (j, covers) in sub.covers_in_class.iter().enumerate() {
        for &i in covers {
            coverers[sub.local_index(i).expect("class point")].push(j);
        }
    }

    for attempt in 0..opts.max_attempts {
        let mut stream = rng::stream(seed, &[attempt as u64]);
        let mut chosen = vec![false; m];
        let mut abstain = vec![false; t];
        for round in 1..=rounds {
            for (c, &p) in chosen.iter_mut().zip(&lps.alpha) {
                *c |= stream.random::<f64>() < p;
            }
            for (s, &p) in abstain.iter_mut().zip(&lps.xi) {
                *s |= stream.random::<f64>() < p;
            }
            let feasible = (0..t).all(|k| abstain[k] || coverers[k].iter().any(|&j| chosen[j]));
            if !feasible {
                continue;
            }
            let objective = (0..m).filter(|&j| chosen[j]).map(|j| sub.cost(j)).sum::<f64>()
                + abstain.iter().filter(|&&s| s).count() as f64;
            if bound.is_none_or(|b| objective <= b + BOUND_TOLERANCE) {
                return Ok(RoundingOutcome {
                    selected: (0..m).filter(|&j| chosen[j]).collect(),
                    abstained: (0..t).filter(|&k| abstain[k]).map(|k| sub.target_points[k]).collect(),
                    rounds_used: round,
                    attempts: attempt + 1,
                    objective,
                    bound,
                });
            }
        }
    }
    Err(Error::Rounding {
        attempts: opts.max_attempts,
    })
}

/// Per-class LP optima and rounding outcomes alongside the assembled solution.
#[derive(Debug, Clone)]
pub struct LpRoundingReport {
    pub solution: PrototypeSolution,
    pub relaxations: Vec<LpSolution>,
    pub outcomes: Vec<RoundingOutcome>,
}

/// Relax, solve and round every class independently, then score the union.
pub fn solve_lp_rounding(problem: &PrototypeProblem, seed: u64) -> Result<PrototypeSolution> {
    Ok(solve_lp_rounding_detailed(problem, seed, &RoundingOptions::default())?.solution)
}

pub fn solve_lp_rounding_detailed(
    problem: &PrototypeProblem,
    seed: u64,
    opts: &RoundingOptions,
) -> Result<LpRoundingReport> {
    let per_class: Vec<(LpSolution, RoundingOutcome)> = (0..problem.n_classes())
        .into_par_iter()
        .map(|l| {
            let sub = problem.subproblem(l);
            let lps = solve_relaxation(&sub).map_err(|e| e.in_class(l))?;
            let class_seed = rng::derive_seed(seed, &[l as u64]);
            let outcome = randomized_round(&lps, &sub, class_seed, opts).map_err(|e| e.in_class(l))?;
            Ok((lps, outcome))
        })
        .collect::<Result<_>>()?;
    let (relaxations, outcomes): (Vec<_>, Vec<_>) = per_class.into_iter().unzip();
    let sets: Vec<Vec<usize>> = outcomes.iter().map(|o| o.selected.clone()).collect();
    let solution = evaluate_solution(problem, &sets)?;
    Ok(LpRoundingReport {
        solution,
        relaxations,
        outcomes,
    })
}

/// Rounded wrong-class coverage per point, straight from 0/1 indicators:
/// `T_i = sum_{l != y_i} sum_{j : i in ball(j)} A_j^(l)`.
pub fn recover_wrong_coverage(problem: &PrototypeProblem, sets: &[Vec<usize>]) -> Vec<usize> {
    let m = problem.m_candidates();
    let indicators: Vec<Vec<bool>> = sets
        .iter()
        .map(|set| {
            let mut a = vec![false; m];
            for &j in set {
                a[j] = true;
            }
            a
        })
        .collect();
    (0..problem.n_points())
        .map(|i| {
            let y = problem.dataset().label(i);
            indicators
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != y)
                .map(|(_, a)| problem.incidence().covered_by(i).iter().filter(|&&j| a[j]).count())
                .sum()
        })
        .collect()
}
