//! Feature tables, dissimilarity matrices and the transforms between them.
//!
//! The selection method only ever looks at dissimilarities between training
//! points (rows) and candidate prototypes (columns). Matrices are stored
//! row-major and are allowed to be rectangular and asymmetric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for kernel symmetry and for negative squared distances.
pub const KERNEL_TOLERANCE: f64 = 1e-9;

/// Dense `rows x cols` table of finite real features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "feature table must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "feature table {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} features, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// New table made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidInput(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &FeatureTable) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::InvalidInput(format!(
                "cannot stack tables with {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(self.rows + other.rows, self.cols, values)
    }
}

/// Dense `n_points x m_candidates` matrix of nonnegative dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n_points: usize,
    m_candidates: usize,
    values: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn new(n_points: usize, m_candidates: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_points * m_candidates {
            return Err(Error::InvalidInput(format!(
                "dissimilarity matrix {n_points}x{m_candidates} needs {} values, got {}",
                n_points * m_candidates,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "dissimilarity at row {}, column {} is {} (must be finite and >= 0)",
                pos / m_candidates.max(1),
                pos % m_candidates.max(1),
                values[pos]
            )));
        }
        Ok(Self {
            n_points,
            m_candidates,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::InvalidInput(format!(
                "row {bad} has {} entries, expected {m}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn m_candidates(&self) -> usize {
        self.m_candidates
    }

    pub fn is_square(&self) -> bool {
        self.n_points == self.m_candidates
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m_candidates + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m_candidates..(i + 1) * self.m_candidates]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sub-matrix with the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n_points) {
            return Err(Error::InvalidInput(format!("row index {r} out of range")));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.m_candidates) {
            return Err(Error::InvalidInput(format!("column index {c} out of range")));
        }
        let values = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        Ok(Self {
            n_points: rows.len(),
            m_candidates: cols.len(),
            values,
        })
    }

    /// Every entry multiplied by `factor` (must be positive and finite).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!("scale factor {factor} must be > 0")));
        }
        Self::new(
            self.n_points,
            self.m_candidates,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Symmetric `n x n` kernel (Gram) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "kernel matrix of size {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite kernel value at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if (a - b).abs() > KERNEL_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "kernel is not symmetric: K[{i}][{j}] = {a} but K[{j}][{i}] = {b}"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "kernel row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

/// Square, symmetric matrix of pairwise distances between the rows of `features`.
pub fn compute_dissimilarity(features: &FeatureTable, metric: Metric) -> DissimilarityMatrix {
    let n = features.rows();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(features.row(i), features.row(j));
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DissimilarityMatrix {
        n_points: n,
        m_candidates: n,
        values,
    }
}

/// Distances from every row of `points` to every row of `candidates`.
pub fn cross_dissimilarity(
    points: &FeatureTable,
    candidates: &FeatureTable,
    metric: Metric,
) -> Result<DissimilarityMatrix> {
    if points.cols() != candidates.cols() {
        return Err(Error::InvalidInput(format!(
            "points have {} features but candidates have {}",
            points.cols(),
            candidates.cols()
        )));
    }
    let m = candidates.rows();
    let values = (0..points.rows())
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| metric.distance(points.row(i), candidates.row(j)))
        .collect();
    Ok(DissimilarityMatrix {
        n_points: points.rows(),
        m_candidates: m,
        values,
    })
}

/// Kernel-induced distance `sqrt(K_ii + K_jj - 2 K_ij)`.
///
/// Squared distances down to `-KERNEL_TOLERANCE` are clamped to zero; anything
/// more negative means the kernel is not positive semidefinite and is rejected.
pub fn kernel_to_distance(kernel: &KernelMatrix) -> Result<DissimilarityMatrix> {
    let n = kernel.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let sq = kernel.get(i, i) + kernel.get(j, j) - 2.0 * kernel.get(i, j);
            if sq < -KERNEL_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "kernel is not positive semidefinite: K_ii + K_jj - 2K_ij = {sq} at ({i}, {j})"
                )));
            }
            let d = sq.max(0.0).sqrt();
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DissimilarityMatrix {
        n_points: n,
        m_candidates: n,
        values,
    })
}

/// Rank dissimilarity relative to a reference set of training rows.
///
/// `out[i][j]` is the number of training rows `t` with `d[t][j] <= d[i][j]`.
/// Balls of radius `eps` in this dissimilarity hold a fixed number of nearest
/// training points per candidate, whatever the local density.
pub fn rank_transform(d: &DissimilarityMatrix, training_rows: &[usize]) -> Result<DissimilarityMatrix> {
    if training_rows.is_empty() {
        return Err(Error::InvalidInput(
            "rank transform needs at least one training row".into(),
        ));
    }
    if let Some(&r) = training_rows.iter().find(|&&r| r >= d.n_points()) {
        return Err(Error::InvalidInput(format!(
            "training row {r} out of range for {} rows",
            d.n_points()
        )));
    }
    let (n, m) = (d.n_points(), d.m_candidates());
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut reference: Vec<f64> = training_rows.iter().map(|&t| d.get(t, j)).collect();
            reference.sort_by(f64::total_cmp);
            (0..n)
                .map(|i| reference.partition_point(|&v| v <= d.get(i, j)) as f64)
                .collect()
        })
        .collect();
    let mut values = vec![0.0; n * m];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            values[i * m + j] = v;
        }
    }
    Ok(DissimilarityMatrix {
        n_points: n,
        m_candidates: m,
        values,
    })
}

/// Type-1 empirical quantile of an ascending sample: the `ceil(p * N)`-th
/// smallest value (1-based), with `p = 0` giving the minimum.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    // the small offset absorbs representation error in products like 0.14 * 100
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Quantiles of the strictly positive off-diagonal dissimilarities.
///
/// For square matrices the diagonal is skipped; zero entries (duplicate points)
/// never enter the pool, so the lowest quantile is a usable radius.
pub fn distance_quantiles(d: &DissimilarityMatrix, probs: &[f64]) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::InvalidParameter("no quantile levels given".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("quantile level {p} outside [0, 1]")));
    }
    let square = d.is_square();
    let mut pool: Vec<f64> = (0..d.n_points())
        .flat_map(|i| d.row(i).iter().enumerate().map(move |(j, &v)| (i, j, v)))
        .filter(|&(i, j, v)| !(square && i == j) && v > 0.0)
        .map(|(_, _, v)| v)
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidInput(
            "all off-diagonal dissimilarities are zero; no radius can be derived".into(),
        ));
    }
    pool.sort_by(f64::total_cmp);
    Ok(probs.iter().map(|&p| empirical_quantile(&pool, p)).collect())
}

/// `count` equally spaced levels from `lo` to `hi` inclusive.
pub fn quantile_levels(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}
