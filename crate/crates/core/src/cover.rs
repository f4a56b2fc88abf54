//! The prototype selection integer program and its per-class decomposition.
//!
//! A candidate `j` chosen as a prototype for class `l` covers every training
//! point strictly inside its ball. The objective charges one unit per
//! training point not covered by its own class (`xi`), one unit per
//! (point, wrong-class prototype) coverage (`eta`), and `lambda` per prototype.
//! Because the wrong-coverage charge of a prototype depends only on the
//! prototype, the program splits into one prize-collecting set cover per
//! class with candidate cost `lambda + |ball(j) \ X_l|`.

use serde::{Deserialize, Serialize};

use crate::dissim::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::greedy::GreedyStep;

/// Class labels for the training points, as dense indices `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    labels: Vec<usize>,
    class_index: Vec<Vec<usize>>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    /// Every class in `0..n_classes` must occur at least once.
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (0..n_classes).map(|l| l.to_string()).collect();
        Self::with_names(labels, names)
    }

    pub fn with_names(labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let n_classes = class_names.len();
        if labels.is_empty() {
            return Err(Error::InvalidInput("dataset has no points".into()));
        }
        let mut class_index = vec![Vec::new(); n_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= n_classes {
                return Err(Error::InvalidInput(format!(
                    "label {y} of point {i} is not below the class count {n_classes}"
                )));
            }
            class_index[y].push(i);
        }
        if let Some(empty) = class_index.iter().position(Vec::is_empty) {
            return Err(Error::InvalidInput(format!(
                "class {empty} ({}) has no points",
                class_names[empty]
            )));
        }
        Ok(Self {
            labels,
            class_index,
            class_names,
        })
    }

    /// Maps arbitrary label strings to class indices. Classes are ordered
    /// numerically when every label parses as a number, lexically otherwise.
    pub fn from_label_names<S: AsRef<str>>(raw: &[S]) -> Result<Self> {
        let mut names: Vec<String> = raw.iter().map(|s| s.as_ref().trim().to_string()).collect();
        names.sort();
        names.dedup();
        if names.iter().all(|s| s.parse::<f64>().is_ok()) {
            names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
        }
        let labels = raw
            .iter()
            .map(|s| names.iter().position(|n| n == s.as_ref().trim()).unwrap())
            .collect();
        Self::with_names(labels, names)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_index.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Point indices belonging to class `l`, ascending.
    pub fn class_points(&self, l: usize) -> &[usize] {
        &self.class_index[l]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Restriction to `indices` (renumbered `0..indices.len()`), keeping the class list.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let labels = indices
            .iter()
            .map(|&i| {
                self.labels
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("point index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_names(labels, self.class_names.clone())
    }
}

/// Which training points fall strictly inside which candidate balls.
#[derive(Debug, Clone, PartialEq)]
pub struct BallIncidence {
    n_points: usize,
    m_candidates: usize,
    epsilon: f64,
    covers: Vec<Vec<usize>>,
    covered_by: Vec<Vec<usize>>,
}

impl BallIncidence {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn m_candidates(&self) -> usize {
        self.m_candidates
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Points inside the ball of candidate `j`, ascending.
    pub fn covers(&self, j: usize) -> &[usize] {
        &self.covers[j]
    }

    /// Candidates whose balls contain point `i`, ascending.
    pub fn covered_by(&self, i: usize) -> &[usize] {
        &self.covered_by[i]
    }
}

/// Ball membership uses `d(x_i, z_j) < epsilon`; points at exactly `epsilon` are outside.
pub fn build_incidence(d: &DissimilarityMatrix, epsilon: f64) -> Result<BallIncidence> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    let (n, m) = (d.n_points(), d.m_candidates());
    let mut covers = vec![Vec::new(); m];
    let mut covered_by = vec![Vec::new(); n];
    for (i, row) in covered_by.iter_mut().enumerate() {
        for (j, &v) in d.row(i).iter().enumerate() {
            if v < epsilon {
                covers[j].push(i);
                row.push(j);
            }
        }
    }
    Ok(BallIncidence {
        n_points: n,
        m_candidates: m,
        epsilon,
        covers,
        covered_by,
    })
}

/// A labeled training set, a candidate ball structure and the per-prototype cost.
#[derive(Debug, Clone)]
pub struct PrototypeProblem {
    dataset: LabeledDataset,
    incidence: BallIncidence,
    lambda: f64,
}

impl PrototypeProblem {
    pub fn new(dataset: LabeledDataset, incidence: BallIncidence, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if incidence.n_points() != dataset.n() {
            return Err(Error::InvalidInput(format!(
                "incidence has {} points but dataset has {}",
                incidence.n_points(),
                dataset.n()
            )));
        }
        Ok(Self {
            dataset,
            incidence,
            lambda,
        })
    }

    /// Builds the incidence from `d` and uses `lambda = 1/n` when none is given.
    pub fn from_dissimilarity(
        dataset: LabeledDataset,
        d: &DissimilarityMatrix,
        epsilon: f64,
        lambda: Option<f64>,
    ) -> Result<Self> {
        let lambda = lambda.unwrap_or(default_lambda(dataset.n()));
        Self::new(dataset, build_incidence(d, epsilon)?, lambda)
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    pub fn incidence(&self) -> &BallIncidence {
        &self.incidence
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_points(&self) -> usize {
        self.dataset.n()
    }

    pub fn n_classes(&self) -> usize {
        self.dataset.n_classes()
    }

    pub fn m_candidates(&self) -> usize {
        self.incidence.m_candidates()
    }

    /// Number of points in the ball of `j` that do not belong to class `l`.
    pub fn wrong_coverage(&self, j: usize, l: usize) -> usize {
        self.incidence
            .covers(j)
            .iter()
            .filter(|&&i| self.dataset.label(i) != l)
            .count()
    }

    /// The prize-collecting set cover instance for class `l`.
    pub fn subproblem(&self, l: usize) -> PcscSubproblem {
        let m = self.m_candidates();
        let mut wrong_counts = Vec::with_capacity(m);
        let mut covers_in_class = Vec::with_capacity(m);
        for j in 0..m {
            let (own, other): (Vec<usize>, Vec<usize>) = self
                .incidence
                .covers(j)
                .iter()
                .partition(|&&i| self.dataset.label(i) == l);
            wrong_counts.push(other.len());
            covers_in_class.push(own);
        }
        PcscSubproblem {
            class_id: l,
            target_points: self.dataset.class_points(l).to_vec(),
            lambda: self.lambda,
            wrong_counts,
            covers_in_class,
        }
    }
}

pub fn default_lambda(n: usize) -> f64 {
    1.0 / n.max(1) as f64
}

/// One class's prize-collecting set cover: pick candidates of cost
/// `lambda + wrong_counts[j]`, pay one unit per target point left uncovered.
#[derive(Debug, Clone, PartialEq)]
pub struct PcscSubproblem {
    pub class_id: usize,
    /// Global indices of the class's points.
    pub target_points: Vec<usize>,
    pub lambda: f64,
    /// `|ball(j) \ X_l|` per candidate.
    pub wrong_counts: Vec<usize>,
    /// `ball(j) ∩ X_l` per candidate, as global point indices.
    pub covers_in_class: Vec<Vec<usize>>,
}

impl PcscSubproblem {
    pub fn m_candidates(&self) -> usize {
        self.wrong_counts.len()
    }

    pub fn cost(&self, j: usize) -> f64 {
        self.lambda + self.wrong_counts[j] as f64
    }

    pub fn costs(&self) -> Vec<f64> {
        (0..self.m_candidates()).map(|j| self.cost(j)).collect()
    }

    /// Position of each global point index within `target_points`.
    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.target_points.binary_search(&global).ok()
    }

    /// Exact objective of choosing `selected` (uncovered target points plus costs).
    pub fn objective_parts(&self, selected: &[usize]) -> ObjectiveParts {
        let mut covered = vec![false; self.target_points.len()];
        let mut wrong = 0;
        for &j in selected {
            wrong += self.wrong_counts[j];
            for &i in &self.covers_in_class[j] {
                if let Some(k) = self.local_index(i) {
                    covered[k] = true;
                }
            }
        }
        ObjectiveParts {
            uncovered: covered.iter().filter(|c| !**c).count(),
            wrong_coverage: wrong,
            prototypes: selected.len(),
        }
    }
}

/// Split `decompose`: one subproblem per class, in class order.
pub fn decompose(problem: &PrototypeProblem) -> Vec<PcscSubproblem> {
    (0..problem.n_classes()).map(|l| problem.subproblem(l)).collect()
}

/// Integer decomposition of an objective value `uncovered + wrong + lambda * prototypes`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub uncovered: usize,
    pub wrong_coverage: usize,
    pub prototypes: usize,
}

impl ObjectiveParts {
    pub fn integral(&self) -> usize {
        self.uncovered + self.wrong_coverage
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.integral() as f64 + lambda * self.prototypes as f64
    }
}

impl std::ops::Add for ObjectiveParts {
    type Output = ObjectiveParts;

    fn add(self, rhs: Self) -> Self {
        ObjectiveParts {
            uncovered: self.uncovered + rhs.uncovered,
            wrong_coverage: self.wrong_coverage + rhs.wrong_coverage,
            prototypes: self.prototypes + rhs.prototypes,
        }
    }
}

impl std::iter::Sum for ObjectiveParts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ObjectiveParts::default(), |a, b| a + b)
    }
}

/// Per-class prototype lists with full slack accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSolution {
    /// Candidate indices per class, in selection order, without duplicates.
    pub prototypes: Vec<Vec<usize>>,
    /// 1 when the point is not covered by any prototype of its own class.
    pub xi: Vec<u8>,
    /// Number of wrong-class prototypes covering the point.
    pub eta: Vec<usize>,
    pub parts: ObjectiveParts,
    pub objective: f64,
    pub per_class_parts: Vec<ObjectiveParts>,
    pub per_class_objective: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<GreedyStep>>,
}

impl PrototypeSolution {
    pub fn n_prototypes(&self) -> usize {
        self.prototypes.iter().map(Vec::len).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.prototypes.iter().map(Vec::len).collect()
    }

    pub fn xi_total(&self) -> usize {
        self.parts.uncovered
    }

    pub fn eta_total(&self) -> usize {
        self.parts.wrong_coverage
    }
}

fn validate_sets(problem: &PrototypeProblem, sets: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    if sets.len() != problem.n_classes() {
        return Err(Error::InvalidInput(format!(
            "expected {} prototype sets, got {}",
            problem.n_classes(),
            sets.len()
        )));
    }
    let m = problem.m_candidates();
    sets.iter()
        .enumerate()
        .map(|(l, set)| {
            let mut seen = vec![false; m];
            let mut out = Vec::with_capacity(set.len());
            for &j in set {
                if j >= m {
                    return Err(Error::InvalidInput(format!(
                        "class {l}: candidate index {j} out of range for {m} candidates"
                    )));
                }
                if !std::mem::replace(&mut seen[j], true) {
                    out.push(j);
                }
            }
            Ok(out)
        })
        .collect()
}

/// Scores a per-class selection. Duplicates are dropped (first occurrence kept).
pub fn evaluate_solution(problem: &PrototypeProblem, sets: &[Vec<usize>]) -> Result<PrototypeSolution> {
    let sets = validate_sets(problem, sets)?;
    let data = problem.dataset();
    let inc = problem.incidence();
    let n = problem.n_points();

    let mut own_covered = vec![false; n];
    let mut eta = vec![0usize; n];
    for (l, set) in sets.iter().enumerate() {
        for &j in set {
            for &i in inc.covers(j) {
                if data.label(i) == l {
                    own_covered[i] = true;
                } else {
                    eta[i] += 1;
                }
            }
        }
    }
    let xi: Vec<u8> = own_covered.iter().map(|&c| u8::from(!c)).collect();

    let parts = ObjectiveParts {
        uncovered: xi.iter().map(|&x| x as usize).sum(),
        wrong_coverage: eta.iter().sum(),
        prototypes: sets.iter().map(Vec::len).sum(),
    };

    // per-class side: sum of own-class xi plus candidate costs C_l(j)
    let per_class_parts: Vec<ObjectiveParts> = sets
        .iter()
        .enumerate()
        .map(|(l, set)| ObjectiveParts {
            uncovered: data.class_points(l).iter().map(|&i| xi[i] as usize).sum(),
            wrong_coverage: set.iter().map(|&j| problem.wrong_coverage(j, l)).sum(),
            prototypes: set.len(),
        })
        .collect();

    let lambda = problem.lambda();
    Ok(PrototypeSolution {
        objective: parts.value(lambda),
        per_class_objective: per_class_parts.iter().map(|p| p.value(lambda)).collect(),
        prototypes: sets,
        xi,
        eta,
        parts,
        per_class_parts,
        trace: None,
    })
}

/// Checks that the joint objective equals the sum of the per-class
/// prize-collecting objectives, the latter computed from `decompose`.
///
/// Equality is exact on the integer parts and prototype counts (hence exact
/// for any `lambda`); the floating values are also compared to within 1e-9.
pub fn decomposition_identity(problem: &PrototypeProblem, sets: &[Vec<usize>]) -> Result<bool> {
    let joint = evaluate_solution(problem, sets)?;
    let subs = decompose(problem);
    let per_class: ObjectiveParts = subs
        .iter()
        .zip(&joint.prototypes)
        .map(|(sub, set)| sub.objective_parts(set))
        .sum();
    let per_class_value: f64 = subs
        .iter()
        .zip(&joint.prototypes)
        .map(|(sub, set)| {
            let p = sub.objective_parts(set);
            p.uncovered as f64 + set.iter().map(|&j| sub.cost(j)).sum::<f64>()
        })
        .sum();
    let exact = joint.parts.integral() == per_class.integral() && joint.parts.prototypes == per_class.prototypes;
    Ok(exact && (joint.objective - per_class_value).abs() <= 1e-9)
}
