//! Greedy selection over (candidate, class) pairs.
//!
//! Each step adds the pair with the largest improvement
//! `newly covered own-class points - wrong-class points covered - lambda`,
//! stopping once no pair improves the objective strictly. The order in which
//! prototypes enter gives a natural ranking of each class's prototypes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cover::{evaluate_solution, PrototypeProblem, PrototypeSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub candidate: usize,
    pub class_id: usize,
    /// Own-class points covered for the first time.
    pub delta_xi: usize,
    /// Wrong-class points inside the ball.
    pub delta_eta: usize,
    pub delta_obj: f64,
    /// Objective of the selection after this step.
    pub cumulative_objective: f64,
}

/// Improvement from adding candidate `j` to class `l` on top of `current_sets`.
///
/// Computed from scratch; the solver itself maintains the same quantities
/// incrementally. `cumulative_objective` is left at NaN.
pub fn delta_objective(problem: &PrototypeProblem, current_sets: &[Vec<usize>], j: usize, l: usize) -> GreedyStep {
    let data = problem.dataset();
    let inc = problem.incidence();
    let mut covered = vec![false; problem.n_points()];
    for &k in &current_sets[l] {
        for &i in inc.covers(k) {
            covered[i] = true;
        }
    }
    let delta_xi = inc
        .covers(j)
        .iter()
        .filter(|&&i| data.label(i) == l && !covered[i])
        .count();
    let delta_eta = problem.wrong_coverage(j, l);
    GreedyStep {
        candidate: j,
        class_id: l,
        delta_xi,
        delta_eta,
        delta_obj: improvement(delta_xi, delta_eta, problem.lambda()),
        cumulative_objective: f64::NAN,
    }
}

fn improvement(delta_xi: usize, delta_eta: usize, lambda: f64) -> f64 {
    (delta_xi as f64 - delta_eta as f64) - lambda
}

/// Runs the greedy algorithm to completion and returns the evaluated
/// selection with its step trace.
///
/// Ties in the improvement go to the lowest class id, then the lowest
/// candidate index.
pub fn solve_greedy(problem: &PrototypeProblem) -> PrototypeSolution {
    let data = problem.dataset();
    let inc = problem.incidence();
    let (n, m, n_classes) = (problem.n_points(), problem.m_candidates(), problem.n_classes());
    let lambda = problem.lambda();

    // gain[l][j]: own-class points of l in ball j not yet covered by P_l
    let mut gain = vec![vec![0usize; m]; n_classes];
    let mut wrong = vec![vec![0usize; m]; n_classes];
    for j in 0..m {
        let ball = inc.covers(j);
        for &i in ball {
            gain[data.label(i)][j] += 1;
        }
        for l in 0..n_classes {
            wrong[l][j] = ball.len() - gain[l][j];
        }
    }

    let mut uncovered = vec![true; n];
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    let mut trace = Vec::new();
    let mut uncovered_total = n;
    let mut wrong_total = 0usize;

    loop {
        // integer score gain - wrong ranks pairs exactly; lambda is common to all
        let mut best: Option<(i64, usize, usize)> = None;
        for l in 0..n_classes {
            for j in 0..m {
                let score = gain[l][j] as i64 - wrong[l][j] as i64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, l, j));
                }
            }
        }
        let Some((_, l, j)) = best else { break };
        let delta_obj = improvement(gain[l][j], wrong[l][j], lambda);
        if delta_obj <= 0.0 {
            break;
        }

        let delta_xi = gain[l][j];
        for &i in inc.covers(j) {
            if data.label(i) == l && std::mem::replace(&mut uncovered[i], false) {
                for &k in inc.covered_by(i) {
                    gain[l][k] -= 1;
                }
            }
        }
        debug_assert_eq!(gain[l][j], 0);
        sets[l].push(j);
        uncovered_total -= delta_xi;
        wrong_total += wrong[l][j];
        let step_count = trace.len() + 1;
        trace.push(GreedyStep {
            candidate: j,
            class_id: l,
            delta_xi,
            delta_eta: wrong[l][j],
            delta_obj,
            cumulative_objective: (uncovered_total + wrong_total) as f64 + lambda * step_count as f64,
        });
    }

    let mut solution = evaluate_solution(problem, &sets).expect("greedy only selects valid candidates");
    solution.trace = Some(trace);
    solution
}

/// Writes the trace as CSV, one row per step. `class_names` labels the class
/// column; pass `None` to print class indices.
pub fn write_trace_csv<W: Write>(
    mut out: W,
    trace: &[GreedyStep],
    class_names: Option<&[String]>,
) -> std::io::Result<()> {
    writeln!(
        out,
        "step,class,candidate,delta_xi,delta_eta,delta_obj,cumulative_objective"
    )?;
    for (k, s) in trace.iter().enumerate() {
        let class = match class_names {
            Some(names) => names[s.class_id].clone(),
            None => s.class_id.to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            k + 1,
            class,
            s.candidate,
            s.delta_xi,
            s.delta_eta,
            s.delta_obj,
            s.cumulative_objective
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{toy, LabeledDataset};
    use crate::dissim::DissimilarityMatrix;
    use crate::oracle::solve_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_deltas() {
        let p = toy::problem();
        let empty = vec![vec![], vec![]];
        let s = delta_objective(&p, &empty, 1, 0);
        assert_eq!((s.delta_xi, s.delta_eta), (3, 0));
        assert!((s.delta_obj - 2.8).abs() < 1e-12);
        let s = delta_objective(&p, &empty, 3, 0);
        assert_eq!((s.delta_xi, s.delta_eta), (0, 2));
        assert!((s.delta_obj + 2.2).abs() < 1e-12);
    }

    #[test]
    fn empty_ball_costs_lambda() {
        // second candidate is far from everything
        let d = DissimilarityMatrix::from_rows(&[vec![0.0, 50.0], vec![1.0, 50.0]]).unwrap();
        let data = LabeledDataset::new(vec![0, 0], 1).unwrap();
        let p = PrototypeProblem::from_dissimilarity(data, &d, 2.0, Some(0.3)).unwrap();
        let s = delta_objective(&p, &[vec![]], 1, 0);
        assert_eq!((s.delta_xi, s.delta_eta), (0, 0));
        assert_eq!(s.delta_obj, -0.3);
    }

    #[test]
    fn toy_solution_and_trace() {
        let p = toy::problem();
        let s = solve_greedy(&p);
        assert_eq!(s.prototypes, vec![vec![1], vec![3]]);
        assert!((s.objective - 0.4).abs() < 1e-12);
        let trace = s.trace.as_ref().unwrap();
        assert_eq!(trace.len(), 2);
        assert!((trace[0].delta_obj - 2.8).abs() < 1e-12);
        assert!((trace[1].delta_obj - 1.8).abs() < 1e-12);
        assert_eq!(trace[1].cumulative_objective, s.objective);
    }

    #[test]
    fn huge_lambda_selects_nothing() {
        let data = LabeledDataset::new(vec![0, 0, 0, 1, 1], 2).unwrap();
        let p = PrototypeProblem::from_dissimilarity(data, &toy::dissimilarity(), 100.0, Some(3.5)).unwrap();
        let s = solve_greedy(&p);
        assert_eq!(s.n_prototypes(), 0);
        assert_eq!(s.objective, 5.0);
        assert!(s.trace.unwrap().is_empty());
    }

    #[test]
    fn tiny_radius_keeps_every_point() {
        let data = LabeledDataset::new(vec![0, 0, 0, 1, 1], 2).unwrap();
        let p = PrototypeProblem::from_dissimilarity(data, &toy::dissimilarity(), 0.5, Some(0.2)).unwrap();
        let s = solve_greedy(&p);
        assert_eq!(s.prototypes, vec![vec![0, 1, 2], vec![3, 4]]);
    }

    #[test]
    fn trace_csv_layout() {
        let s = solve_greedy(&toy::problem());
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, s.trace.as_ref().unwrap(), None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "step,class,candidate,delta_xi,delta_eta,delta_obj,cumulative_objective"
        );
        assert!(lines[1].starts_with("1,0,1,3,0,2.8"));
        assert_eq!(lines.len(), 3);
    }

    fn random_problem(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> (PrototypeProblem, DissimilarityMatrix) {
        let n = rng.random_range(2..=max_n);
        let m = rng.random_range(1..=max_m);
        let l_count = rng.random_range(1..=3.min(n));
        let labels: Vec<usize> = (0..n)
            .map(|i| if i < l_count { i } else { rng.random_range(0..l_count) })
            .collect();
        let values = (0..n * m).map(|_| rng.random_range(0.0..10.0)).collect();
        let d = DissimilarityMatrix::new(n, m, values).unwrap();
        let eps = rng.random_range(1.0..7.0);
        let lambda = [0.0, 1.0 / n as f64, 0.5][rng.random_range(0..3)];
        let data = LabeledDataset::new(labels, l_count).unwrap();
        (
            PrototypeProblem::from_dissimilarity(data, &d, eps, Some(lambda)).unwrap(),
            d,
        )
    }

    #[test]
    fn steps_match_delta_objective_and_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let (p, _) = random_problem(&mut rng, 25, 25);
            let s = solve_greedy(&p);
            let trace = s.trace.as_ref().unwrap();
            let mut sets = vec![Vec::new(); p.n_classes()];
            let mut prev = evaluate_solution(&p, &sets).unwrap();
            let mut seen = std::collections::HashSet::new();
            for step in trace {
                assert!(step.delta_obj > 0.0);
                assert!(seen.insert((step.candidate, step.class_id)));
                let fresh = delta_objective(&p, &sets, step.candidate, step.class_id);
                assert_eq!((fresh.delta_xi, fresh.delta_eta), (step.delta_xi, step.delta_eta));
                // no other pair was strictly better
                for l in 0..p.n_classes() {
                    for j in 0..p.m_candidates() {
                        let other = delta_objective(&p, &sets, j, l);
                        assert!(other.delta_obj <= step.delta_obj + 1e-12);
                    }
                }
                sets[step.class_id].push(step.candidate);
                let now = evaluate_solution(&p, &sets).unwrap();
                assert_eq!(now.parts.uncovered + step.delta_xi, prev.parts.uncovered);
                assert_eq!(now.parts.wrong_coverage, prev.parts.wrong_coverage + step.delta_eta);
                assert_eq!(now.objective, step.cumulative_objective);
                assert!((prev.objective - now.objective - step.delta_obj).abs() < 1e-9);
                prev = now;
            }
            assert!(trace.len() <= p.n_points());
            // final state: nothing left to gain
            for l in 0..p.n_classes() {
                for j in 0..p.m_candidates() {
                    assert!(delta_objective(&p, &sets, j, l).delta_obj <= 0.0);
                }
            }
        }
    }

    #[test]
    fn never_below_exact_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..150 {
            let (p, _) = random_problem(&mut rng, 12, 10);
            let s = solve_greedy(&p);
            let opt = solve_exact(&p, 16).unwrap();
            assert!(s.objective >= opt.optimal_objective - 1e-9);
        }
    }
}
