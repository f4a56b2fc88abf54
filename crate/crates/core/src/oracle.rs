//! Exact solver by exhaustive enumeration, for ground truth on tiny instances.
//!
//! Classes are independent, so each class enumerates the `2^m` candidate
//! subsets on its own and the joint optimum is assembled from the per-class
//! optima.

use crate::cover::{decompose, evaluate_solution, ObjectiveParts, PcscSubproblem, PrototypeProblem};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_CANDIDATES: usize = 16;

/// Objectives closer than this are treated as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimal_objective: f64,
    pub optimal_parts: ObjectiveParts,
    /// Lexicographically smallest optimal candidate list per class, ascending.
    pub optimal_sets: Vec<Vec<usize>>,
    pub per_class_objective: Vec<f64>,
    /// Number of subsets scored across all classes.
    pub enumerated: u64,
}

pub fn solve_exact(problem: &PrototypeProblem, max_candidates: usize) -> Result<OracleResult> {
    let m = problem.m_candidates();
    if m > max_candidates {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration limited to {max_candidates} candidates, problem has {m}"
        )));
    }
    if m >= 63 {
        return Err(Error::InvalidParameter(format!(
            "{m} candidates is too many to enumerate"
        )));
    }

    let mut optimal_sets = Vec::with_capacity(problem.n_classes());
    let mut per_class_objective = Vec::with_capacity(problem.n_classes());
    let mut parts = ObjectiveParts::default();
    let mut enumerated = 0u64;
    for sub in decompose(problem) {
        let (set, class_parts, count) = solve_class(&sub);
        enumerated += count;
        per_class_objective.push(class_parts.value(problem.lambda()));
        parts = parts + class_parts;
        optimal_sets.push(set);
    }

    debug_assert!({
        let joint = evaluate_solution(problem, &optimal_sets).unwrap();
        joint.parts.integral() == parts.integral() && joint.parts.prototypes == parts.prototypes
    });

    Ok(OracleResult {
        optimal_objective: parts.value(problem.lambda()),
        optimal_parts: parts,
        optimal_sets,
        per_class_objective,
        enumerated,
    })
}

fn solve_class(sub: &PcscSubproblem) -> (Vec<usize>, ObjectiveParts, u64) {
    let m = sub.m_candidates();
    let targets = sub.target_points.len();
    let words = targets.div_ceil(64).max(1);

    // coverage bitset over the class's points, per candidate
    let masks: Vec<Vec<u64>> = (0..m)
        .map(|j| {
            let mut mask = vec![0u64; words];
            for &i in &sub.covers_in_class[j] {
                let k = sub.local_index(i).expect("covers_in_class holds class points");
                mask[k / 64] |= 1 << (k % 64);
            }
            mask
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>, ObjectiveParts)> = None;
    let mut union = vec![0u64; words];
    for subset in 0u64..(1u64 << m) {
        union.iter_mut().for_each(|w| *w = 0);
        let mut wrong = 0;
        let mut chosen = Vec::new();
        for (j, mask) in masks.iter().enumerate() {
            if subset >> j & 1 == 1 {
                chosen.push(j);
                wrong += sub.wrong_counts[j];
                for (u, w) in union.iter_mut().zip(mask) {
                    *u |= w;
                }
            }
        }
        let covered: usize = union.iter().map(|w| w.count_ones() as usize).sum();
        let parts = ObjectiveParts {
            uncovered: targets - covered,
            wrong_coverage: wrong,
            prototypes: chosen.len(),
        };
        let value = parts.value(sub.lambda);
        let better = match &best {
            None => true,
            Some((v, set, _)) => value < v - TIE_TOLERANCE || ((value - v).abs() <= TIE_TOLERANCE && chosen < *set),
        };
        if better {
            best = Some((value, chosen, parts));
        }
    }
    let (_, set, parts) = best.expect("the empty subset is always scored");
    (set, parts, 1u64 << m)
}
