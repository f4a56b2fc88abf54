use protosel::cover::PrototypeProblem;
use protosel::dissim::compute_dissimilarity;
use protosel::select::{fit_split, prepare_split, Candidate};
use protosel::{cross_validate, CandidateSpace, CvOptions, FeatureTable, LabeledDataset, Metric, Solver};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(centers: &[[f64; 2]], per_class: usize, sigma: f64, seed: u64) -> (FeatureTable, LabeledDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (l, c) in centers.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
            labels.push(l);
        }
    }
    (
        FeatureTable::from_rows(&rows).unwrap(),
        LabeledDataset::new(labels, centers.len()).unwrap(),
    )
}

#[test]
fn separated_blobs_have_zero_error_below_the_gap() {
    let (table, data) = blobs(&[[0.0, 0.0], [10.0, 0.0]], 30, 1.0, 1);
    let d = compute_dissimilarity(&table, Metric::L2);
    let gap = (0..data.n())
        .flat_map(|i| (0..data.n()).map(move |j| (i, j)))
        .filter(|&(i, j)| data.label(i) != data.label(j))
        .map(|(i, j)| d.get(i, j))
        .fold(f64::INFINITY, f64::min);
    let grid: Vec<f64> = (1..=8).map(|k| gap * k as f64 / 9.0).collect();
    let space = CandidateSpace::Features {
        table: &table,
        metric: Metric::L2,
        kmeans: None,
    };
    for solver in [Solver::Greedy, Solver::LpRounding] {
        let opts = CvOptions {
            folds: 5,
            solver,
            seed: 4,
            ..Default::default()
        };
        let report = cross_validate(&data, &space, &grid, &opts).unwrap();
        assert!(
            report.mean_error.iter().all(|&e| e == 0.0),
            "{solver:?}: {:?}",
            report.mean_error
        );
        assert_eq!(report.chosen_epsilon, *grid.last().unwrap());
    }
}

#[test]
fn shuffled_labels_give_chance_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 240;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    labels.shuffle(&mut rng);
    let table = FeatureTable::from_rows(&rows).unwrap();
    let data = LabeledDataset::new(labels, 3).unwrap();
    let space = CandidateSpace::Features {
        table: &table,
        metric: Metric::L2,
        kmeans: None,
    };
    let grid = [0.05, 0.1, 0.2];
    let report = cross_validate(
        &data,
        &space,
        &grid,
        &CvOptions {
            folds: 10,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let overall = report.mean_error.iter().sum::<f64>() / grid.len() as f64;
    assert!((overall - 2.0 / 3.0).abs() < 0.1, "{:?}", report.mean_error);
}

#[test]
fn single_radius_grid() {
    let (table, data) = blobs(&[[0.0, 0.0], [4.0, 0.0]], 12, 1.0, 3);
    let space = CandidateSpace::Features {
        table: &table,
        metric: Metric::L1,
        kmeans: Some(2),
    };
    let report = cross_validate(
        &data,
        &space,
        &[1.3],
        &CvOptions {
            folds: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(report.chosen_epsilon, 1.3);
    assert_eq!(report.fold_errors[0].len(), 3);
}

#[test]
fn fold_missing_a_class_is_an_error() {
    // class 1 has a single point, so one fold's training part lacks it
    let table = FeatureTable::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![9.0]]).unwrap();
    let data = LabeledDataset::new(vec![0, 0, 0, 1], 2).unwrap();
    let space = CandidateSpace::Features {
        table: &table,
        metric: Metric::L2,
        kmeans: None,
    };
    assert!(cross_validate(
        &data,
        &space,
        &[1.0],
        &CvOptions {
            folds: 2,
            ..Default::default()
        }
    )
    .is_err());
}

fn perturb_rows(table: &FeatureTable, rows: &[usize], by: f64) -> FeatureTable {
    let perturbed: Vec<Vec<f64>> = (0..table.rows())
        .map(|i| {
            let r = table.row(i).to_vec();
            if rows.contains(&i) {
                r.iter().map(|v| v + by).collect()
            } else {
                r
            }
        })
        .collect();
    FeatureTable::from_rows(&perturbed).unwrap()
}

/// Prototype coordinates chosen on a split, in class order.
fn chosen(
    space: &CandidateSpace<'_>,
    data: &LabeledDataset,
    train: &[usize],
    test: &[usize],
    rank: bool,
) -> Vec<Vec<Vec<f64>>> {
    let split = prepare_split(space, data, train, test, rank, 5).unwrap();
    let (sol, _) = fit_split(&split, &[], if rank { 4.0 } else { 1.0 }, None, Solver::Greedy, 0).unwrap();
    let table = split.candidate_table.as_ref().unwrap();
    sol.prototypes
        .iter()
        .map(|set| set.iter().map(|&j| table.row(j).to_vec()).collect())
        .collect()
}

#[test]
fn held_out_points_do_not_leak_into_selection() {
    let (table, data) = blobs(&[[0.0, 0.0], [3.0, 0.0]], 20, 1.0, 8);
    let test: Vec<usize> = vec![0, 5, 21, 33];
    let train: Vec<usize> = (0..data.n()).filter(|i| !test.contains(i)).collect();
    let moved = perturb_rows(&table, &test, 7.5);
    for (rank, kmeans) in [(false, None), (false, Some(3)), (true, None)] {
        let a = CandidateSpace::Features {
            table: &table,
            metric: Metric::L2,
            kmeans,
        };
        let b = CandidateSpace::Features {
            table: &moved,
            metric: Metric::L2,
            kmeans,
        };
        // moving or dropping the held-out points changes nothing
        let base = chosen(&a, &data, &train, &test, rank);
        assert_eq!(
            base,
            chosen(&b, &data, &train, &test, rank),
            "rank {rank} kmeans {kmeans:?}"
        );
        assert_eq!(base, chosen(&a, &data, &train, &[], rank));
        // putting one of them into the training part does
        let mut with_dup = train.clone();
        with_dup.push(test[0]);
        let split = prepare_split(&a, &data, &with_dup, &test[1..], rank, 5).unwrap();
        assert_eq!(split.train.n_points(), train.len() + 1);
        assert!(split.candidates.contains(&Candidate::Training { index: test[0] }));
    }
}

#[test]
fn duplicating_a_held_out_point_changes_the_problem() {
    let (table, data) = blobs(&[[0.0, 0.0], [3.0, 0.0]], 20, 1.0, 9);
    // an isolated held-out point: nothing in the training part covers it
    let h = 4;
    let table = perturb_rows(&table, &[h], 25.0);
    let train: Vec<usize> = (0..data.n()).filter(|&i| i != h).collect();
    let space = CandidateSpace::Features {
        table: &table,
        metric: Metric::L2,
        kmeans: None,
    };
    let objective = |train: &[usize]| {
        let split = prepare_split(&space, &data, train, &[], false, 0).unwrap();
        let p =
            PrototypeProblem::from_dissimilarity(split.train_dataset.clone(), &split.train, 1.0, Some(0.05)).unwrap();
        Solver::Greedy.solve(&p, 0).unwrap().objective
    };
    let mut dup = train.clone();
    dup.push(h);
    assert_ne!(objective(&train), objective(&dup));
}

#[test]
fn cross_validation_is_deterministic() {
    let (table, data) = blobs(&[[0.0, 0.0], [2.0, 1.0], [1.0, 3.0]], 15, 1.0, 10);
    let space = CandidateSpace::Features {
        table: &table,
        metric: Metric::L2,
        kmeans: Some(2),
    };
    let grid = [0.5, 1.0, 1.5];
    let opts = CvOptions {
        folds: 5,
        solver: Solver::LpRounding,
        seed: 11,
        ..Default::default()
    };
    let a = cross_validate(&data, &space, &grid, &opts).unwrap();
    let b = cross_validate(&data, &space, &grid, &opts).unwrap();
    assert_eq!(a, b);
    let c = cross_validate(&data, &space, &grid, &CvOptions { rank: true, ..opts }).unwrap();
    assert_eq!(c.grid, a.grid);
}
