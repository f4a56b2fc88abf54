use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use protosel::cover::PrototypeProblem;
use protosel::dissim::{cross_dissimilarity, rank_transform};
use protosel::rng::derive_seed;
use protosel::select::prepare_split;
use protosel::{predict, CandidateSpace, DissimilarityMatrix, FeatureTable, LabeledDataset, Metric, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

const TOY: &str = "x,y\n0,1\n1,1\n2,1\n10,2\n11,2\n";

fn protosel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protosel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = protosel(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn toy_select_writes_counts_and_objective() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "toy.csv", TOY);
    let sol = dir.path().join("sol.json");
    let trace = dir.path().join("trace.csv");
    ok(&[
        "select",
        "--input",
        s(&input),
        "--labels-col",
        "y",
        "--metric",
        "l2",
        "--epsilon",
        "1.5",
        "--lambda",
        "0.2",
        "--solver",
        "greedy",
        "--out",
        s(&sol),
        "--trace",
        s(&trace),
    ]);
    let doc = json(&sol);
    let counts: Vec<u64> = doc["per_class"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["count"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, vec![1, 1]);
    assert!((doc["objective"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(
        doc["per_class"][0]["prototypes"][0]["coordinates"][0].as_f64(),
        Some(1.0)
    );
    assert_eq!(
        doc["per_class"][1]["prototypes"][0]["coordinates"][0].as_f64(),
        Some(10.0)
    );
    let trace = std::fs::read_to_string(&trace).unwrap();
    let rows: Vec<&str> = trace.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].contains(",2.8,"));
    assert!(rows[2].contains(",1.8,"));
    // no temporary files are left next to the outputs
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn lp_rounding_matches_toy_optimum() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "toy.csv", TOY);
    let sol = dir.path().join("sol.json");
    for seed in ["0", "1", "99"] {
        ok(&[
            "select",
            "--input",
            s(&input),
            "--labels-col",
            "y",
            "--epsilon",
            "1.5",
            "--lambda",
            "0.2",
            "--solver",
            "lp-rounding",
            "--seed",
            seed,
            "--out",
            s(&sol),
        ]);
        let doc = json(&sol);
        assert!((doc["objective"].as_f64().unwrap() - 0.4).abs() < 1e-12);
        assert!(doc.get("trace").is_none());
    }
}

#[test]
fn classify_toy_query() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "toy.csv", TOY);
    let queries = write(&dir, "q.csv", "x\n5.9\n5.5\n");
    let sol = dir.path().join("sol.json");
    let pred = dir.path().join("pred.json");
    ok(&[
        "select",
        "--input",
        s(&input),
        "--labels-col",
        "y",
        "--epsilon",
        "1.5",
        "--lambda",
        "0.2",
        "--out",
        s(&sol),
    ]);
    ok(&[
        "classify",
        "--model",
        s(&sol),
        "--queries",
        s(&queries),
        "--out",
        s(&pred),
    ]);
    let doc = json(&pred);
    assert_eq!(doc["predictions"][0]["label"], "2");
    assert_eq!(doc["predictions"][1]["label"], "1");
    assert!(doc.get("report").is_none());

    let labeled = write(&dir, "ql.csv", "x,y\n5.9,2\n0.2,1\n10.4,2\n");
    let out = ok(&[
        "classify",
        "--model",
        s(&sol),
        "--queries",
        s(&labeled),
        "--labels-col",
        "y",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["error_rate"].as_f64(), Some(0.0));
    assert_eq!(doc["report"]["confusion"], serde_json::json!([[1, 0], [0, 2]]));
}

#[test]
fn cv_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "toy.csv", TOY);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        ok(&[
            "cv",
            "--input",
            s(&input),
            "--labels-col",
            "y",
            "--grid",
            "20",
            "--folds",
            "5",
            "--seed",
            "7",
            "--out",
            s(out),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let doc = json(&a);
    let grid: Vec<f64> = doc["grid"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(grid.contains(&doc["chosen_epsilon"].as_f64().unwrap()));
    assert_eq!(doc["folds"].as_u64(), Some(5));

    let csv = ok(&[
        "cv",
        "--input",
        s(&input),
        "--labels-col",
        "y",
        "--grid-values",
        "1.5,3",
        "--folds",
        "2",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("epsilon,mean_error,se,mean_prototypes\n1.5,"));
    assert_eq!(text.lines().count(), 3);
}

fn random_problem(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 3;
        let c = [0.0, 3.0, 6.0][y];
        rows.push(vec![c + rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        labels.push(y);
    }
    let queries = (0..60)
        .map(|_| vec![rng.random_range(-3.0..9.0), rng.random_range(-3.0..3.0)])
        .collect();
    (rows, labels, queries)
}

fn csv_of(rows: &[Vec<f64>], labels: Option<&[usize]>) -> String {
    let mut out = String::from(if labels.is_some() { "a,b,y\n" } else { "a,b\n" });
    for (i, r) in rows.iter().enumerate() {
        // shortest round-trip formatting keeps the values exact
        out.push_str(&format!("{},{}", r[0], r[1]));
        if let Some(l) = labels {
            out.push_str(&format!(",c{}", l[i]));
        }
        out.push('\n');
    }
    out
}

/// Labels from the CLI must equal an in-process select + predict on the same data.
fn round_trip(metric_args: &[&str], metric: Metric, rank: bool, kmeans: Option<usize>) {
    let (rows, labels, queries) = random_problem(5, 45);
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "train.csv", &csv_of(&rows, Some(&labels)));
    let qpath = write(&dir, "q.csv", &csv_of(&queries, None));
    let sol = dir.path().join("sol.json");
    let seed = 3u64;
    let eps = if rank { "6" } else { "1.2" };
    let mut args = vec![
        "select",
        "--input",
        s(&input),
        "--labels-col",
        "y",
        "--epsilon",
        eps,
        "--seed",
        "3",
    ];
    args.extend_from_slice(metric_args);
    let k = kmeans.map(|k| k.to_string());
    if let Some(k) = &k {
        args.extend_from_slice(&["--kmeans", k]);
    }
    args.extend_from_slice(&["--out", s(&sol)]);
    ok(&args);
    let out = ok(&[
        "classify",
        "--model",
        s(&sol),
        "--queries",
        s(&qpath),
        "--format",
        "csv",
    ]);
    let cli: Vec<usize> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();

    let table = FeatureTable::from_rows(&rows).unwrap();
    let dataset = LabeledDataset::new(labels.clone(), 3).unwrap();
    let space = CandidateSpace::Features {
        table: &table,
        metric,
        kmeans,
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    let split = prepare_split(&space, &dataset, &all, &[], false, derive_seed(seed, &[0])).unwrap();
    let cands = split.candidate_table.clone().unwrap();
    let qd = cross_dissimilarity(&FeatureTable::from_rows(&queries).unwrap(), &cands, metric).unwrap();
    let (train, test) = if rank {
        let mut values = split.train.values().to_vec();
        values.extend_from_slice(qd.values());
        let stacked = DissimilarityMatrix::new(rows.len() + queries.len(), cands.rows(), values).unwrap();
        let ranked = rank_transform(&stacked, &all).unwrap();
        let cols: Vec<usize> = (0..cands.rows()).collect();
        let test_rows: Vec<usize> = (rows.len()..stacked.n_points()).collect();
        (
            ranked.submatrix(&all, &cols).unwrap(),
            ranked.submatrix(&test_rows, &cols).unwrap(),
        )
    } else {
        (split.train.clone(), qd)
    };
    let problem = PrototypeProblem::from_dissimilarity(dataset, &train, eps.parse().unwrap(), None).unwrap();
    let solution = Solver::Greedy.solve(&problem, derive_seed(seed, &[1])).unwrap();
    assert!(solution.n_prototypes() > 0);
    let direct: Vec<usize> = predict(&solution.prototypes, &test)
        .unwrap()
        .iter()
        .map(|p| p.label)
        .collect();
    assert_eq!(cli, direct);
}

#[test]
fn round_trip_l2() {
    round_trip(&["--metric", "l2"], Metric::L2, false, None);
}

#[test]
fn round_trip_l1_with_kmeans() {
    round_trip(&["--metric", "l1"], Metric::L1, false, Some(3));
}

#[test]
fn round_trip_rank() {
    round_trip(&["--metric", "rank", "--base-metric", "l2"], Metric::L2, true, None);
}

#[test]
fn precomputed_and_kernel_inputs() {
    let dir = TempDir::new().unwrap();
    let pts: [f64; 5] = [0.0, 1.0, 2.0, 10.0, 11.0];
    let mut d = String::from("y,p0,p1,p2,p3,p4\n");
    let mut k = String::from("y,p0,p1,p2,p3,p4\n");
    for (i, a) in pts.iter().enumerate() {
        let label = if i < 3 { "a" } else { "b" };
        let drow: Vec<String> = pts.iter().map(|b| (a - b).abs().to_string()).collect();
        // linear kernel of 1-D points gives the same distances
        let krow: Vec<String> = pts.iter().map(|b| (a * b).to_string()).collect();
        d.push_str(&format!("{label},{}\n", drow.join(",")));
        k.push_str(&format!("{label},{}\n", krow.join(",")));
    }
    let dpath = write(&dir, "d.csv", &d);
    let kpath = write(&dir, "k.csv", &k);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ok(&[
        "select",
        "--input",
        s(&dpath),
        "--kind",
        "dissimilarity",
        "--labels-col",
        "y",
        "--epsilon",
        "1.5",
        "--lambda",
        "0.2",
        "--out",
        s(&a),
    ]);
    ok(&[
        "select",
        "--input",
        s(&kpath),
        "--kind",
        "kernel",
        "--labels-col",
        "0",
        "--epsilon",
        "1.5",
        "--lambda",
        "0.2",
        "--out",
        s(&b),
    ]);
    for p in [&a, &b] {
        let doc = json(p);
        assert!((doc["objective"].as_f64().unwrap() - 0.4).abs() < 1e-9);
        assert_eq!(doc["per_class"][1]["prototypes"][0]["training_index"].as_u64(), Some(3));
        assert_eq!(doc["per_class"][1]["label"], "b");
    }
    // query 5.9 as a row of distances to the five training points
    let q = write(&dir, "q.csv", "5.9,4.9,3.9,4.1,5.1\n");
    let out = ok(&["classify", "--model", s(&a), "--queries", s(&q), "--format", "csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "index,class_id,label\n0,1,b\n");
}

#[test]
fn exit_codes_and_diagnostics() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "toy.csv", TOY);
    let code = |args: &[&str]| protosel(args).status.code().unwrap();

    assert_eq!(code(&["select", "--input", s(&input), "--labels-col", "y"]), 2);
    assert_eq!(
        code(&["select", "--input", s(&input), "--labels-col", "y", "--epsilon", "-1"]),
        2
    );
    assert_eq!(
        code(&[
            "select",
            "--input",
            s(&input),
            "--labels-col",
            "y",
            "--epsilon",
            "1",
            "--metric",
            "precomputed"
        ]),
        2
    );
    assert_eq!(
        code(&["cv", "--input", s(&input), "--labels-col", "y", "--folds", "9"]),
        2
    );
    assert_eq!(
        code(&[
            "select",
            "--input",
            s(&input),
            "--labels-col",
            "y",
            "--epsilon",
            "1",
            "--solver",
            "lp-rounding",
            "--trace",
            "t.csv"
        ]),
        2
    );

    let bad = write(&dir, "bad.csv", "x,y\n0,1\n1,1\nNaN,2\n");
    let out = protosel(&["select", "--input", s(&bad), "--labels-col", "y", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("bad.csv:4") && msg.contains("'x'"), "{msg}");

    let ragged = write(&dir, "ragged.csv", "x,y\n0,1\n1\n");
    let out = protosel(&["select", "--input", s(&ragged), "--labels-col", "y", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("ragged.csv:3"));

    let missing = dir.path().join("nope.csv");
    assert_eq!(
        code(&["select", "--input", s(&missing), "--labels-col", "y", "--epsilon", "1"]),
        3
    );
}

#[test]
fn quantile_grid() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "toy.csv", TOY);
    let out = ok(&[
        "quantiles",
        "--input",
        s(&input),
        "--labels-col",
        "y",
        "--probs",
        "0,0.5,1",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["epsilon"], serde_json::json!([1.0, 8.0, 11.0]));
    let out = ok(&[
        "quantiles",
        "--input",
        s(&input),
        "--labels-col",
        "y",
        "--format",
        "csv",
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 21);
}
