//! The solution document written by `select` and read by `classify`.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use protosel::{DissimilarityMatrix, GreedyStep, Metric};

use crate::data::Values;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    L1,
    L2,
    Rank,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BaseMetric {
    L1,
    L2,
}

impl From<BaseMetric> for Metric {
    fn from(m: BaseMetric) -> Metric {
        match m {
            BaseMetric::L1 => Metric::L1,
            BaseMetric::L2 => Metric::L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeEntry {
    /// Column of the candidate set used during selection.
    pub candidate: usize,
    pub synthetic: bool,
    /// Row of the training input, for real examples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<f64>>,
    /// Ascending raw training distances to this prototype, for the rank metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_reference: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class_id: usize,
    pub label: String,
    pub count: usize,
    pub prototypes: Vec<PrototypeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub epsilon: f64,
    pub lambda: f64,
    pub metric: MetricArg,
    /// Underlying feature metric; absent for precomputed inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_metric: Option<BaseMetric>,
    pub solver: protosel::Solver,
    pub seed: u64,
    /// `"training"` or `"training+kmeans"`.
    pub candidate_provenance: String,
    pub n_train: usize,
    /// Feature columns the queries must have; absent for precomputed inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_features: Option<usize>,
    pub per_class: Vec<ClassEntry>,
    pub xi_total: usize,
    pub eta_total: usize,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<GreedyStep>>,
}

impl SolutionDocument {
    pub fn class_names(&self) -> Vec<String> {
        self.per_class.iter().map(|c| c.label.clone()).collect()
    }

    /// Query-to-prototype dissimilarities, one column per prototype in class
    /// order, and the matching per-class column lists.
    pub fn query_dissimilarities(&self, queries: &Values) -> CliResult<(DissimilarityMatrix, Vec<Vec<usize>>)> {
        let protos: Vec<&PrototypeEntry> = self.per_class.iter().flat_map(|c| &c.prototypes).collect();
        let mut sets = Vec::with_capacity(self.per_class.len());
        let mut next = 0;
        for c in &self.per_class {
            sets.push((next..next + c.prototypes.len()).collect());
            next += c.prototypes.len();
        }
        let raw: Vec<Vec<f64>> = match queries {
            Values::Features(table) => {
                let (Some(p), Some(base)) = (self.n_features, self.base_metric) else {
                    return Err(CliError::Usage(
                        "model was fitted on a precomputed matrix; queries must be dissimilarities".into(),
                    ));
                };
                if table.cols() != p {
                    return Err(CliError::Data(format!(
                        "queries have {} feature columns, model expects {p}",
                        table.cols()
                    )));
                }
                let metric = Metric::from(base);
                (0..table.rows())
                    .map(|q| {
                        protos
                            .iter()
                            .map(|e| {
                                let z = e.coordinates.as_ref().ok_or_else(|| {
                                    CliError::Data(format!("prototype {} has no coordinates", e.candidate))
                                })?;
                                Ok(metric.distance(table.row(q), z))
                            })
                            .collect::<CliResult<Vec<f64>>>()
                    })
                    .collect::<CliResult<_>>()?
            }
            Values::Matrix(d) => {
                if self.n_features.is_some() {
                    return Err(CliError::Usage(
                        "model was fitted on features; queries must be feature rows".into(),
                    ));
                }
                if d.m_candidates() != self.n_train {
                    return Err(CliError::Data(format!(
                        "query matrix has {} columns, model has {} training points",
                        d.m_candidates(),
                        self.n_train
                    )));
                }
                let cols = protos
                    .iter()
                    .map(|e| {
                        e.training_index
                            .ok_or_else(|| CliError::Data(format!("prototype {} has no training index", e.candidate)))
                    })
                    .collect::<CliResult<Vec<usize>>>()?;
                (0..d.n_points())
                    .map(|q| cols.iter().map(|&j| d.get(q, j)).collect())
                    .collect()
            }
        };
        let rows = if self.metric == MetricArg::Rank {
            raw.into_iter()
                .map(|row| {
                    row.iter()
                        .zip(&protos)
                        .map(|(&v, e)| {
                            let reference = e.rank_reference.as_ref().ok_or_else(|| {
                                CliError::Data(format!("prototype {} has no rank reference", e.candidate))
                            })?;
                            Ok(reference.partition_point(|&t| t <= v) as f64)
                        })
                        .collect::<CliResult<Vec<f64>>>()
                })
                .collect::<CliResult<Vec<_>>>()?
        } else {
            raw
        };
        let n = rows.len();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        let d = DissimilarityMatrix::new(n, protos.len(), values)?;
        Ok((d, sets))
    }
}
