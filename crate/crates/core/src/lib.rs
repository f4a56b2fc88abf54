//! Prototype selection for nearest-prototype classification.
//!
//! Each class gets a set of prototypes, each prototype an ε-ball. A good set
//! covers many points of its own class, few of the others, and stays small.
//! The choice is posed as prize-collecting set cover, which splits into one
//! independent subproblem per class, and solved greedily or by LP relaxation
//! with randomized rounding.
//!
//! ```
//! use protosel::{compute_dissimilarity, predict, solve_greedy, FeatureTable, LabeledDataset, Metric, PrototypeProblem};
//!
//! # fn main() -> protosel::Result<()> {
//! let x = FeatureTable::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0]])?;
//! let d = compute_dissimilarity(&x, Metric::L2);
//! let data = LabeledDataset::new(vec![0, 0, 0, 1, 1], 2)?;
//! let problem = PrototypeProblem::from_dissimilarity(data, &d, 1.5, Some(0.2))?;
//! let solution = solve_greedy(&problem);
//! assert_eq!(solution.prototypes, vec![vec![1], vec![3]]);
//! let labels: Vec<usize> = predict(&solution.prototypes, &d)?.iter().map(|p| p.label).collect();
//! assert_eq!(labels, vec![0, 0, 0, 1, 1]);
//! # Ok(())
//! # }
//! ```

pub mod classify;
pub mod cover;
pub mod dissim;
pub mod error;
pub mod greedy;
pub mod lpround;
pub mod oracle;
pub mod rng;
pub mod select;

pub use classify::{evaluate_classifier, predict, ClassifierReport, Prediction};
pub use cover::{
    build_incidence, decompose, default_lambda, evaluate_solution, BallIncidence, LabeledDataset, ObjectiveParts,
    PcscSubproblem, PrototypeProblem, PrototypeSolution,
};
pub use dissim::{
    compute_dissimilarity, cross_dissimilarity, distance_quantiles, kernel_to_distance, rank_transform,
    DissimilarityMatrix, FeatureTable, KernelMatrix, Metric,
};
pub use error::{Error, Result};
pub use greedy::{solve_greedy, GreedyStep};
pub use lpround::{solve_lp_rounding, LpSolution};
pub use select::{cross_validate, make_folds, one_se_rule, CandidateSpace, CvOptions, CvReport, Solver};
