//! Seeded Lloyd's k-means, used to add per-class centroids to the candidate set.

use rand::seq::index::sample;
use rand::Rng;

use crate::cover::LabeledDataset;
use crate::dissim::FeatureTable;
use crate::error::{Error, Result};
use crate::rng;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each iteration.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, z) in centroids.iter().enumerate() {
        let d = sq_dist(p, z);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

fn sse(points: &[&[f64]], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum()
}

/// Lloyd's algorithm from `k` distinct sampled points. With `k >= n` every
/// point is its own centroid. An empty cluster takes over the point farthest
/// from its current centroid.
pub fn lloyd<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R, max_iterations: usize) -> KMeansResult {
    let n = points.len();
    if n <= k {
        return KMeansResult {
            centroids: points.iter().map(|p| p.to_vec()).collect(),
            assignment: (0..n).collect(),
            sse_history: vec![0.0],
            iterations: 0,
        };
    }
    let dim = points[0].len();
    let mut centroids: Vec<Vec<f64>> = sample(rng, n, k).into_iter().map(|i| points[i].to_vec()).collect();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut sse_history = Vec::new();
    let mut iterations = 0;

    loop {
        // repair empty clusters
        let mut sizes = vec![0usize; k];
        assignment.iter().for_each(|&c| sizes[c] += 1);
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let far = (0..n)
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(points[a], &centroids[assignment[a]])
                        .total_cmp(&sq_dist(points[b], &centroids[assignment[b]]))
                        .then(b.cmp(&a))
                })
                .expect("n > k leaves a cluster with two points");
            sizes[assignment[far]] -= 1;
            sizes[empty] = 1;
            assignment[far] = empty;
            centroids[empty] = points[far].to_vec();
        }

        // update step
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &c) in points.iter().zip(&assignment) {
            for (s, v) in sums[c].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            centroids[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
        }
        iterations += 1;
        sse_history.push(sse(points, &centroids, &assignment));

        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment || iterations >= max_iterations {
            break;
        }
        assignment = next;
    }
    KMeansResult {
        centroids,
        assignment,
        sse_history,
        iterations,
    }
}

/// Candidate table made of the training rows followed by per-class centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCandidates {
    pub table: FeatureTable,
    /// True for centroid rows.
    pub synthetic: Vec<bool>,
    /// Class whose points produced the centroid; `None` for training rows.
    pub centroid_class: Vec<Option<usize>>,
}

/// Runs k-means separately on each class and appends the centroids to the
/// training rows. Class `l` uses the random stream derived from `(seed, l)`.
pub fn augment_candidates_kmeans(
    features: &FeatureTable,
    dataset: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<AugmentedCandidates> {
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    if features.rows() != dataset.n() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows for {} labeled points",
            features.rows(),
            dataset.n()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut centroid_class = vec![None; features.rows()];
    for l in 0..dataset.n_classes() {
        let points: Vec<&[f64]> = dataset.class_points(l).iter().map(|&i| features.row(i)).collect();
        let mut stream = rng::stream(seed, &[l as u64]);
        let result = lloyd(&points, k, &mut stream, MAX_ITERATIONS);
        centroid_class.extend(std::iter::repeat_n(Some(l), result.centroids.len()));
        rows.extend(result.centroids);
    }
    let table = if rows.is_empty() {
        features.clone()
    } else {
        features.stack(&FeatureTable::from_rows(&rows)?)?
    };
    Ok(AugmentedCandidates {
        synthetic: centroid_class.iter().map(Option::is_some).collect(),
        table,
        centroid_class,
    })
}
