//! Choosing the ball radius: stratified folds, cross-validation over a grid
//! of radii, and the one-standard-error rule.
//!
//! Everything a fold's selection depends on (candidate set, k-means
//! centroids, rank references, incidence) is rebuilt from that fold's
//! training part only.

mod kmeans;

pub use kmeans::{augment_candidates_kmeans, lloyd, AugmentedCandidates, KMeansResult};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{predict, report_from};
use crate::cover::{LabeledDataset, PrototypeProblem, PrototypeSolution};
use crate::dissim::{
    cross_dissimilarity, distance_quantiles, quantile_levels, rank_transform, DissimilarityMatrix, FeatureTable, Metric,
};
use crate::error::{Error, Result};
use crate::greedy::solve_greedy;
use crate::lpround::solve_lp_rounding;
use crate::rng;

/// Quantile levels of the default radius grid: 20 points from the minimum to the median.
pub fn default_grid_levels() -> Vec<f64> {
    quantile_levels(20, 0.0, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Greedy,
    LpRounding,
}

impl Solver {
    pub fn solve(self, problem: &PrototypeProblem, seed: u64) -> Result<PrototypeSolution> {
        match self {
            Solver::Greedy => Ok(solve_greedy(problem)),
            Solver::LpRounding => solve_lp_rounding(problem, seed),
        }
    }
}

/// Where candidate prototypes and their dissimilarities come from.
#[derive(Debug, Clone, Copy)]
pub enum CandidateSpace<'a> {
    /// Square matrix over all points; candidates are the training points.
    Precomputed(&'a DissimilarityMatrix),
    /// Feature vectors; candidates are the training points plus, optionally,
    /// `kmeans` centroids per class.
    Features {
        table: &'a FeatureTable,
        metric: Metric,
        kmeans: Option<usize>,
    },
}

/// Origin of a candidate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    /// A training point, by its index in the full dataset.
    Training { index: usize },
    /// A k-means centroid of one class's training points.
    Centroid { class_id: usize, coordinates: Vec<f64> },
}

/// Training and held-out dissimilarities to a common candidate set.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train_dataset: LabeledDataset,
    pub train: DissimilarityMatrix,
    pub test: DissimilarityMatrix,
    pub candidates: Vec<Candidate>,
    /// Candidate coordinates, for feature spaces.
    pub candidate_table: Option<FeatureTable>,
}

/// Builds the matrices for one train/test split. When `rank` is set, both
/// matrices are rank-transformed against the training rows.
pub fn prepare_split(
    space: &CandidateSpace<'_>,
    dataset: &LabeledDataset,
    train_idx: &[usize],
    test_idx: &[usize],
    rank: bool,
    seed: u64,
) -> Result<PreparedSplit> {
    let train_dataset = dataset
        .subset(train_idx)
        .map_err(|e| Error::InvalidInput(format!("training part cannot be used: {e}")))?;
    let (mut train, mut test, candidates, candidate_table) = match *space {
        CandidateSpace::Precomputed(d) => {
            if !d.is_square() || d.n_points() != dataset.n() {
                return Err(Error::InvalidInput(format!(
                    "precomputed matrix is {}x{}, expected {n}x{n}",
                    d.n_points(),
                    d.m_candidates(),
                    n = dataset.n()
                )));
            }
            let candidates = train_idx.iter().map(|&index| Candidate::Training { index }).collect();
            (
                d.submatrix(train_idx, train_idx)?,
                d.submatrix(test_idx, train_idx)?,
                candidates,
                None,
            )
        }
        CandidateSpace::Features { table, metric, kmeans } => {
            if table.rows() != dataset.n() {
                return Err(Error::InvalidInput(format!(
                    "{} feature rows for {} labels",
                    table.rows(),
                    dataset.n()
                )));
            }
            let train_table = table.select_rows(train_idx)?;
            let mut candidates: Vec<Candidate> = train_idx.iter().map(|&index| Candidate::Training { index }).collect();
            let cand_table = match kmeans {
                Some(k) => {
                    let aug = augment_candidates_kmeans(&train_table, &train_dataset, k, seed)?;
                    for r in train_idx.len()..aug.table.rows() {
                        candidates.push(Candidate::Centroid {
                            class_id: aug.centroid_class[r].expect("centroid row"),
                            coordinates: aug.table.row(r).to_vec(),
                        });
                    }
                    aug.table
                }
                None => train_table.clone(),
            };
            let train = cross_dissimilarity(&train_table, &cand_table, metric)?;
            let test = if test_idx.is_empty() {
                DissimilarityMatrix::new(0, cand_table.rows(), Vec::new())?
            } else {
                cross_dissimilarity(&table.select_rows(test_idx)?, &cand_table, metric)?
            };
            (train, test, candidates, Some(cand_table))
        }
    };
    if rank {
        let n_train = train.n_points();
        let reference: Vec<usize> = (0..n_train).collect();
        let stacked = stack_rows(&train, &test)?;
        let ranked = rank_transform(&stacked, &reference)?;
        let all: Vec<usize> = (0..ranked.m_candidates()).collect();
        train = ranked.submatrix(&reference, &all)?;
        test = ranked.submatrix(&(n_train..ranked.n_points()).collect::<Vec<_>>(), &all)?;
    }
    Ok(PreparedSplit {
        train_dataset,
        train,
        test,
        candidates,
        candidate_table,
    })
}

fn stack_rows(a: &DissimilarityMatrix, b: &DissimilarityMatrix) -> Result<DissimilarityMatrix> {
    let mut values = a.values().to_vec();
    values.extend_from_slice(b.values());
    DissimilarityMatrix::new(a.n_points() + b.n_points(), a.m_candidates(), values)
}

/// Strictly positive training-to-training dissimilarities (candidates that are
/// training points only), as used for radius quantiles.
pub fn training_block(split: &PreparedSplit) -> Result<DissimilarityMatrix> {
    let cols: Vec<usize> = split
        .candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c, Candidate::Training { .. }))
        .map(|(j, _)| j)
        .collect();
    let rows: Vec<usize> = (0..split.train.n_points()).collect();
    split.train.submatrix(&rows, &cols)
}

/// Radii at the given quantile levels of the positive training dissimilarities.
pub fn epsilon_grid(split: &PreparedSplit, levels: &[f64]) -> Result<Vec<f64>> {
    let mut grid = distance_quantiles(&training_block(split)?, levels)?;
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Stratified assignment of points to `k` folds: each class is shuffled and
/// dealt round-robin, continuing where the previous class stopped.
pub fn make_folds(dataset: &LabeledDataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    if k > dataset.n() {
        return Err(Error::InvalidParameter(format!(
            "{k} folds for only {} points",
            dataset.n()
        )));
    }
    let mut stream = rng::stream(seed, &[0x666f_6c64]);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for l in 0..dataset.n_classes() {
        let mut pts = dataset.class_points(l).to_vec();
        pts.shuffle(&mut stream);
        for i in pts {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    /// Per-prototype cost; `None` means `1 / n_train` in each fold.
    pub lambda: Option<f64>,
    pub solver: Solver,
    pub rank: bool,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            lambda: None,
            solver: Solver::Greedy,
            rank: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub mean_error: Vec<f64>,
    /// Sample standard deviation of the fold errors over `sqrt(folds)`.
    pub std_error: Vec<f64>,
    pub mean_prototypes: Vec<f64>,
    /// `fold_errors[e][f]`: error of fold `f` at radius `grid[e]`.
    pub fold_errors: Vec<Vec<f64>>,
    pub folds: usize,
    pub chosen_epsilon: f64,
}

impl CvReport {
    /// Builds a report from per-radius fold errors and prototype counts, choosing
    /// the radius with the one-standard-error rule.
    pub fn from_folds(grid: Vec<f64>, fold_errors: Vec<Vec<f64>>, fold_prototypes: &[Vec<usize>]) -> Self {
        let folds = fold_errors.first().map_or(0, Vec::len);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mean_error: Vec<f64> = fold_errors.iter().map(|e| mean(e)).collect();
        let std_error = fold_errors
            .iter()
            .zip(&mean_error)
            .map(|(e, &mu)| {
                if e.len() < 2 {
                    return 0.0;
                }
                let var = e.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (e.len() - 1) as f64;
                var.sqrt() / (e.len() as f64).sqrt()
            })
            .collect();
        let mean_prototypes = fold_prototypes
            .iter()
            .map(|c| c.iter().sum::<usize>() as f64 / c.len() as f64)
            .collect();
        let mut report = CvReport {
            grid,
            mean_error,
            std_error,
            mean_prototypes,
            fold_errors,
            folds,
            chosen_epsilon: f64::NAN,
        };
        report.chosen_epsilon = one_se_rule(&report);
        report
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epsilon,mean_error,se,mean_prototypes")?;
        for e in 0..self.grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.grid[e], self.mean_error[e], self.std_error[e], self.mean_prototypes[e]
            )?;
        }
        Ok(())
    }
}

/// Largest radius whose mean error is within one standard error of the best.
///
/// Among radii tied at the minimum error, the largest one supplies the
/// standard error, so the result does not depend on grid order.
pub fn one_se_rule(report: &CvReport) -> f64 {
    let entries: Vec<(f64, f64, f64)> = report
        .grid
        .iter()
        .zip(&report.mean_error)
        .zip(&report.std_error)
        .map(|((&e, &m), &s)| (e, m, s))
        .collect();
    let Some(&(_, best_err, _)) = entries.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
        return f64::NAN;
    };
    let (_, _, best_se) = entries
        .iter()
        .filter(|x| x.1 == best_err)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .copied()
        .expect("minimum exists");
    let threshold = best_err + best_se;
    entries
        .iter()
        .filter(|x| x.1 <= threshold + 1e-12)
        .map(|x| x.0)
        .max_by(f64::total_cmp)
        .expect("the minimum is within its own threshold")
}

/// Selects prototypes on a prepared split's training part and classifies its test part.
pub fn fit_split(
    split: &PreparedSplit,
    test_labels: &[usize],
    epsilon: f64,
    lambda: Option<f64>,
    solver: Solver,
    seed: u64,
) -> Result<(PrototypeSolution, f64)> {
    let problem = PrototypeProblem::from_dissimilarity(split.train_dataset.clone(), &split.train, epsilon, lambda)?;
    let solution = solver.solve(&problem, seed)?;
    let error = if test_labels.is_empty() {
        0.0
    } else if solution.n_prototypes() == 0 {
        // nothing to classify with: every held-out point counts as an error
        1.0
    } else {
        let preds = predict(&solution.prototypes, &split.test)?;
        report_from(&preds, test_labels, split.train_dataset.n_classes()).error_rate
    };
    Ok((solution, error))
}

/// K-fold cross-validation of the selection method over a grid of radii.
pub fn cross_validate(
    dataset: &LabeledDataset,
    space: &CandidateSpace<'_>,
    grid: &[f64],
    opts: &CvOptions,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty radius grid".into()));
    }
    if let Some(e) = grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::InvalidParameter(format!("radius {e} in grid must be > 0")));
    }
    let folds = make_folds(dataset, opts.folds, opts.seed)?;
    let n = dataset.n();

    let per_fold: Vec<Vec<(f64, usize)>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let mut in_test = vec![false; n];
            test_idx.iter().for_each(|&i| in_test[i] = true);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let split = prepare_split(
                space,
                dataset,
                &train_idx,
                test_idx,
                opts.rank,
                rng::derive_seed(opts.seed, &[f as u64, 0]),
            )
            .map_err(|e| Error::InvalidInput(format!("fold {f}: {e}")))?;
            let test_labels: Vec<usize> = test_idx.iter().map(|&i| dataset.label(i)).collect();
            grid.iter()
                .enumerate()
                .map(|(e, &eps)| {
                    let seed = rng::derive_seed(opts.seed, &[f as u64, 1, e as u64]);
                    let (sol, err) = fit_split(&split, &test_labels, eps, opts.lambda, opts.solver, seed)?;
                    Ok((err, sol.n_prototypes()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let fold_errors: Vec<Vec<f64>> = (0..grid.len())
        .map(|e| per_fold.iter().map(|f| f[e].0).collect())
        .collect();
    let fold_protos: Vec<Vec<usize>> = (0..grid.len())
        .map(|e| per_fold.iter().map(|f| f[e].1).collect())
        .collect();
    Ok(CvReport::from_folds(grid.to_vec(), fold_errors, &fold_protos))
}
