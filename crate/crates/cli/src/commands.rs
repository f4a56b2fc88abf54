use std::io::Write;
use std::path::Path;

use serde::Serialize;

use protosel::cover::PrototypeProblem;
use protosel::dissim::{distance_quantiles, quantile_levels, rank_transform};
use protosel::greedy::write_trace_csv;
use protosel::rng::derive_seed;
use protosel::select::{epsilon_grid, prepare_split, training_block, Candidate, PreparedSplit};
use protosel::{
    cross_validate, default_lambda, evaluate_classifier, predict, CandidateSpace, CvOptions, LabeledDataset, Metric,
    Solver,
};

use crate::data::{load, Input, InputKind, Values};
use crate::error::{CliError, CliResult};
use crate::model::{BaseMetric, ClassEntry, MetricArg, PrototypeEntry, SolutionDocument};
use crate::{ClassifyArgs, Command, CvArgs, DataArgs, EpsilonArg, Format, QuantilesArgs, SelectArgs};

pub fn run(cli: crate::Cli) -> CliResult<()> {
    match cli.command {
        Command::Select(a) => select(&a),
        Command::Cv(a) => cv(&a),
        Command::Classify(a) => classify(&a),
        Command::Quantiles(a) => quantiles(&a),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let Some(path) = out else {
        let mut stdout = std::io::stdout().lock();
        return stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::io("<stdout>", e));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("flushing to memory")
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s.into_bytes()
}

/// Training data with its candidate space resolved from the flags.
struct Training {
    input: Input,
    dataset: LabeledDataset,
    metric: MetricArg,
    base_metric: Option<BaseMetric>,
    rank: bool,
    kmeans: Option<usize>,
}

impl Training {
    fn load(args: &DataArgs) -> CliResult<Self> {
        let Some(labels_col) = args.labels_col.as_deref() else {
            return Err(CliError::Usage("--labels-col is required for training data".into()));
        };
        let input = load(&args.input, args.kind, Some(labels_col))?;
        let labels = input.labels.as_ref().expect("label column requested");
        let dataset = LabeledDataset::from_label_names(labels)
            .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
        let features = args.kind == InputKind::Features;
        let metric = args.metric.unwrap_or(if features {
            MetricArg::L2
        } else {
            MetricArg::Precomputed
        });
        let base_metric = match (metric, features) {
            (MetricArg::L1, true) => Some(BaseMetric::L1),
            (MetricArg::L2, true) => Some(BaseMetric::L2),
            (MetricArg::Rank, true) => Some(
                args.base_metric
                    .ok_or_else(|| CliError::Usage("--metric rank on features needs --base-metric l1|l2".into()))?,
            ),
            (MetricArg::Precomputed, true) => {
                return Err(CliError::Usage(
                    "--metric precomputed needs --kind dissimilarity or kernel".into(),
                ))
            }
            (MetricArg::L1 | MetricArg::L2, false) => {
                return Err(CliError::Usage(
                    format!("--metric {metric:?} needs feature input; use precomputed or rank for matrices")
                        .to_lowercase(),
                ))
            }
            (_, false) => None,
        };
        if !features && args.base_metric.is_some() {
            return Err(CliError::Usage("--base-metric applies to feature input only".into()));
        }
        if !features && args.kmeans.is_some() {
            return Err(CliError::Usage(
                "--kmeans needs feature input, not a precomputed matrix".into(),
            ));
        }
        Ok(Training {
            input,
            dataset,
            metric,
            base_metric,
            rank: metric == MetricArg::Rank,
            kmeans: args.kmeans,
        })
    }

    fn space(&self) -> CandidateSpace<'_> {
        match &self.input.values {
            Values::Features(table) => CandidateSpace::Features {
                table,
                metric: Metric::from(self.base_metric.expect("feature input has a base metric")),
                kmeans: self.kmeans,
            },
            Values::Matrix(d) => CandidateSpace::Precomputed(d),
        }
    }

    fn all(&self) -> Vec<usize> {
        (0..self.dataset.n()).collect()
    }

    /// Whole training set as one split, plus the raw (pre-rank) matrix.
    fn full_split(&self, seed: u64) -> CliResult<(PreparedSplit, protosel::DissimilarityMatrix)> {
        let all = self.all();
        let mut split = prepare_split(&self.space(), &self.dataset, &all, &[], false, derive_seed(seed, &[0]))?;
        let raw = split.train.clone();
        if self.rank {
            split.train = rank_transform(&raw, &all)?;
        }
        Ok((split, raw))
    }
}

fn select(args: &SelectArgs) -> CliResult<()> {
    let training = Training::load(&args.data)?;
    let solver = Solver::from(args.solver);
    if args.trace.is_some() && solver != Solver::Greedy {
        return Err(CliError::Usage("--trace is only produced by the greedy solver".into()));
    }
    let seed = args.data.seed;
    let (split, raw) = training.full_split(seed)?;
    let epsilon = match args.epsilon {
        EpsilonArg::Value(v) => v,
        EpsilonArg::Quantile(p) => epsilon_grid(&split, &[p])?[0],
    };
    let n = training.dataset.n();
    let lambda = args.lambda.0.unwrap_or_else(|| default_lambda(n));
    let problem =
        PrototypeProblem::from_dissimilarity(split.train_dataset.clone(), &split.train, epsilon, Some(lambda))?;
    let solution = solver.solve(&problem, derive_seed(seed, &[1]))?;

    let names = training.dataset.class_names();
    let entry = |j: usize| {
        let rank_reference = training.rank.then(|| {
            let mut col: Vec<f64> = (0..raw.n_points()).map(|i| raw.get(i, j)).collect();
            col.sort_by(f64::total_cmp);
            col
        });
        match &split.candidates[j] {
            Candidate::Training { index } => PrototypeEntry {
                candidate: j,
                synthetic: false,
                training_index: Some(*index),
                coordinates: split.candidate_table.as_ref().map(|t| t.row(j).to_vec()),
                rank_reference,
            },
            Candidate::Centroid { coordinates, .. } => PrototypeEntry {
                candidate: j,
                synthetic: true,
                training_index: None,
                coordinates: Some(coordinates.clone()),
                rank_reference,
            },
        }
    };
    let per_class = solution
        .prototypes
        .iter()
        .enumerate()
        .map(|(l, set)| ClassEntry {
            class_id: l,
            label: names[l].clone(),
            count: set.len(),
            prototypes: set.iter().map(|&j| entry(j)).collect(),
        })
        .collect();
    let doc = SolutionDocument {
        epsilon,
        lambda,
        metric: training.metric,
        base_metric: training.base_metric,
        solver,
        seed,
        candidate_provenance: if training.kmeans.is_some() {
            "training+kmeans"
        } else {
            "training"
        }
        .into(),
        n_train: n,
        n_features: match &training.input.values {
            Values::Features(t) => Some(t.cols()),
            Values::Matrix(_) => None,
        },
        per_class,
        xi_total: solution.xi_total(),
        eta_total: solution.eta_total(),
        objective: solution.objective,
        trace: solution.trace.clone(),
    };

    if let (Some(path), Some(trace)) = (&args.trace, &solution.trace) {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, trace, Some(names)).expect("writing to memory");
        write_output(Some(path), &buf)?;
    }
    let bytes = match args.format {
        Format::Json => to_json(&doc),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut record = |r: [String; 6]| w.write_record(&r).expect("writing to memory");
            record(["class_id", "label", "order", "candidate", "synthetic", "training_index"].map(String::from));
            for c in &doc.per_class {
                for (k, p) in c.prototypes.iter().enumerate() {
                    record([
                        c.class_id.to_string(),
                        c.label.clone(),
                        (k + 1).to_string(),
                        p.candidate.to_string(),
                        p.synthetic.to_string(),
                        p.training_index.map_or(String::new(), |i| i.to_string()),
                    ]);
                }
            }
            into_bytes(w)
        }
    };
    write_output(args.out.as_deref(), &bytes)
}

fn cv(args: &CvArgs) -> CliResult<()> {
    let training = Training::load(&args.data)?;
    let grid = match &args.grid_values {
        Some(values) => values.clone(),
        None => {
            if args.grid == 0 {
                return Err(CliError::Usage("--grid must be at least 1".into()));
            }
            let (split, _) = training.full_split(args.data.seed)?;
            epsilon_grid(&split, &quantile_levels(args.grid, 0.0, 0.5))?
        }
    };
    let opts = CvOptions {
        folds: args.folds,
        lambda: args.lambda.0,
        solver: args.solver.into(),
        rank: training.rank,
        seed: args.data.seed,
    };
    let report = cross_validate(&training.dataset, &training.space(), &grid, &opts)?;
    let bytes = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).expect("writing to memory");
            buf
        }
    };
    write_output(args.out.as_deref(), &bytes)
}

#[derive(Serialize)]
struct PredictionRow {
    index: usize,
    class_id: usize,
    label: String,
    class_distances: Vec<f64>,
}

#[derive(Serialize)]
struct PredictionDocument {
    predictions: Vec<PredictionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<protosel::ClassifierReport>,
}

fn classify(args: &ClassifyArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| CliError::io(&args.model, e))?;
    let model: SolutionDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}:{}: {e}", args.model.display(), e.line())))?;
    let kind = args.kind.unwrap_or(if model.n_features.is_some() {
        InputKind::Features
    } else {
        InputKind::Dissimilarity
    });
    if kind == InputKind::Kernel {
        return Err(CliError::Usage(
            "queries must be features or dissimilarities, not a kernel".into(),
        ));
    }
    let queries = load(&args.queries, kind, args.labels_col.as_deref())?;
    let (d, sets) = model.query_dissimilarities(&queries.values)?;
    let names = model.class_names();
    let predictions = predict(&sets, &d)?;
    let report = match &queries.labels {
        Some(labels) => {
            let ids = labels
                .iter()
                .enumerate()
                .map(|(q, y)| {
                    names.iter().position(|n| n == y.trim()).ok_or_else(|| {
                        CliError::Data(format!(
                            "{}: query {q} has label '{y}' unknown to the model",
                            args.queries.display()
                        ))
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(evaluate_classifier(&sets, &d, &ids)?)
        }
        None => None,
    };
    let bytes = match args.format {
        Format::Json => to_json(&PredictionDocument {
            predictions: predictions
                .into_iter()
                .enumerate()
                .map(|(index, p)| PredictionRow {
                    index,
                    class_id: p.label,
                    label: names[p.label].clone(),
                    class_distances: p.class_distances,
                })
                .collect(),
            report,
        }),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["index", "class_id", "label"])
                .expect("writing to memory");
            for (q, p) in predictions.iter().enumerate() {
                w.write_record([q.to_string(), p.label.to_string(), names[p.label].clone()])
                    .expect("writing to memory");
            }
            into_bytes(w)
        }
    };
    write_output(args.out.as_deref(), &bytes)
}

#[derive(Serialize)]
struct QuantileDocument {
    levels: Vec<f64>,
    epsilon: Vec<f64>,
}

fn quantiles(args: &QuantilesArgs) -> CliResult<()> {
    let training = Training::load(&args.data)?;
    let levels = match &args.probs {
        Some(p) => p.clone(),
        None => quantile_levels(args.grid, 0.0, 0.5),
    };
    let (split, _) = training.full_split(args.data.seed)?;
    let epsilon = distance_quantiles(&training_block(&split)?, &levels)?;
    let bytes = match args.format {
        Format::Json => to_json(&QuantileDocument { levels, epsilon }),
        Format::Csv => {
            let mut out = String::from("level,epsilon\n");
            for (p, e) in levels.iter().zip(&epsilon) {
                out.push_str(&format!("{p},{e}\n"));
            }
            out.into_bytes()
        }
    };
    write_output(args.out.as_deref(), &bytes)
}
