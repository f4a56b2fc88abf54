//! Nearest-prototype classification.
//!
//! Queries arrive as rows of dissimilarities to the candidate set, so the
//! classifier never needs features or a metric.

use serde::{Deserialize, Serialize};

use crate::dissim::DissimilarityMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    /// Distance to the nearest prototype of each class; `inf` for classes without prototypes.
    pub class_distances: Vec<f64>,
}

/// Labels every query row by the class of its nearest prototype.
/// Ties go to the lowest class id.
pub fn predict(prototypes: &[Vec<usize>], queries: &DissimilarityMatrix) -> Result<Vec<Prediction>> {
    if prototypes.iter().all(Vec::is_empty) {
        return Err(Error::InvalidState(
            "cannot classify: every class has an empty prototype set".into(),
        ));
    }
    let m = queries.m_candidates();
    if let Some(&j) = prototypes.iter().flatten().find(|&&j| j >= m) {
        return Err(Error::InvalidInput(format!(
            "prototype {j} has no column in a query matrix with {m} candidates"
        )));
    }
    Ok((0..queries.n_points())
        .map(|q| {
            let row = queries.row(q);
            let class_distances: Vec<f64> = prototypes
                .iter()
                .map(|set| set.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min))
                .collect();
            let label = argmin_lowest(&class_distances);
            Prediction { label, class_distances }
        })
        .collect())
}

fn argmin_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (l, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = l;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub error_rate: f64,
    pub misclassified: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate_classifier(
    prototypes: &[Vec<usize>],
    test_dissims: &DissimilarityMatrix,
    test_labels: &[usize],
) -> Result<ClassifierReport> {
    if test_labels.len() != test_dissims.n_points() {
        return Err(Error::InvalidInput(format!(
            "{} test labels for {} query rows",
            test_labels.len(),
            test_dissims.n_points()
        )));
    }
    let n_classes = prototypes.len();
    if let Some(&y) = test_labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::InvalidInput(format!(
            "test label {y} outside the {n_classes} training classes"
        )));
    }
    let predictions = predict(prototypes, test_dissims)?;
    Ok(report_from(&predictions, test_labels, n_classes))
}

pub(crate) fn report_from(predictions: &[Prediction], labels: &[usize], n_classes: usize) -> ClassifierReport {
    let mut confusion = vec![vec![0; n_classes]; n_classes];
    for (p, &y) in predictions.iter().zip(labels) {
        confusion[y][p.label] += 1;
    }
    let misclassified = predictions.iter().zip(labels).filter(|(p, &y)| p.label != y).count();
    let total = labels.len();
    ClassifierReport {
        error_rate: if total == 0 {
            0.0
        } else {
            misclassified as f64 / total as f64
        },
        misclassified,
        total,
        confusion,
    }
}
