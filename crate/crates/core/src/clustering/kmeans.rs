//! Lloyd's algorithm with k-means++ seeding and restarts.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClusterError, ClusterModel, FeatureMatrix};
use crate::matrix::{sq_dist, Matrix};
use crate::patch_ingest::StandardizedAbilityTable;

const MAX_ITERATIONS: usize = 300;
const SHIFT_TOLERANCE: f64 = 1e-6;
/// Population stds at or below this are treated as zero variance.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Fits K-Means on a raw feature matrix.
///
/// Columns are z-scored with parameters computed here and frozen into the
/// model. Each of `restarts` runs draws its own k-means++ initialization from
/// an independent, seed-derived stream; the run with the lowest SSE wins
/// (first winner on ties). Deterministic for equal inputs.
pub fn fit_kmeans(
    matrix: &Matrix,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel, ClusterError> {
    let columns = (0..matrix.cols()).map(|j| format!("c{j}")).collect();
    fit_with_metadata(matrix, columns, Vec::new(), k, seed, restarts)
}

/// Fits on a [`FeatureMatrix`], carrying its column names and source patches
/// into the model.
pub fn fit_kmeans_features(
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel, ClusterError> {
    fit_with_metadata(&features.matrix, features.columns.clone(), features.patches(), k, seed, restarts)
}

fn fit_with_metadata(
    matrix: &Matrix,
    columns: Vec<String>,
    fit_patches: Vec<String>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if matrix.rows() < k {
        return Err(ClusterError::TooFewRows { rows: matrix.rows(), k });
    }
    check_finite(matrix)?;

    let (column_means, column_stds, excluded_columns) = scaling_parameters(matrix);
    let z = standardize(matrix, &column_means, &column_stds, &excluded_columns);

    let mut best: Option<(Matrix, f64)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let (centroids, sse) = lloyd(&z, k, &mut rng).run();
        if best.as_ref().is_none_or(|(_, best_sse)| sse < *best_sse) {
            best = Some((centroids, sse));
        }
    }
    let (centroids, _) = best.expect("restarts >= 1");

    Ok(ClusterModel {
        k,
        columns,
        centroids,
        column_means,
        column_stds,
        excluded_columns,
        fit_patches,
        seed,
    })
}

/// Labels each raw-space row with its nearest centroid; ties resolve to the
/// lowest index. The model is untouched.
pub fn assign(model: &ClusterModel, matrix: &Matrix) -> Result<Vec<usize>, ClusterError> {
    if matrix.cols() != model.dims() {
        return Err(ClusterError::DimensionMismatch {
            detail: format!("matrix has {} columns, model expects {}", matrix.cols(), model.dims()),
        });
    }
    let mut z = vec![0.0; model.dims()];
    let labels = matrix
        .iter_rows()
        .map(|row| {
            model.standardize_row(row, &mut z);
            nearest(&model.centroids, &z).0
        })
        .collect();
    Ok(labels)
}

/// Projects a standardized table onto the model's columns and assigns it.
pub fn assign_table(
    model: &ClusterModel,
    table: &StandardizedAbilityTable,
) -> Result<Vec<usize>, ClusterError> {
    let projected = model.project_table(table)?;
    assign(model, &projected)
}

/// Sum of squared distances (standardized space) from rows to their nearest
/// centroid.
pub fn compute_sse(model: &ClusterModel, matrix: &Matrix) -> Result<f64, ClusterError> {
    if matrix.cols() != model.dims() {
        return Err(ClusterError::DimensionMismatch {
            detail: format!("matrix has {} columns, model expects {}", matrix.cols(), model.dims()),
        });
    }
    let mut z = vec![0.0; model.dims()];
    let mut total = 0.0;
    for row in matrix.iter_rows() {
        model.standardize_row(row, &mut z);
        total += nearest(&model.centroids, &z).1;
    }
    Ok(total)
}

fn check_finite(matrix: &Matrix) -> Result<(), ClusterError> {
    for i in 0..matrix.rows() {
        for (j, v) in matrix.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(ClusterError::NonFiniteInput { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Per-column mean and population std, with zero-variance columns listed and
/// their std pinned to 1.0 so division is harmless.
pub(super) fn scaling_parameters(matrix: &Matrix) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = matrix.rows() as f64;
    let d = matrix.cols();
    let mut means = vec![0.0; d];
    for row in matrix.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut variances = vec![0.0; d];
    for row in matrix.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            let diff = v - means[j];
            variances[j] += diff * diff;
        }
    }
    let mut stds = vec![0.0; d];
    let mut excluded = Vec::new();
    for j in 0..d {
        let std = (variances[j] / n).sqrt();
        if std <= VARIANCE_FLOOR {
            stds[j] = 1.0;
            excluded.push(j);
        } else {
            stds[j] = std;
        }
    }
    (means, stds, excluded)
}

pub(super) fn standardize(matrix: &Matrix, means: &[f64], stds: &[f64], excluded: &[usize]) -> Matrix {
    let mut z = Matrix::zeros(matrix.rows(), matrix.cols());
    for i in 0..matrix.rows() {
        let row = matrix.row(i);
        let out = z.row_mut(i);
        for j in 0..row.len() {
            out[j] = (row[j] - means[j]) / stds[j];
        }
        for &j in excluded {
            out[j] = 0.0;
        }
    }
    z
}

fn nearest(centroids: &Matrix, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(centroids.row(c), point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub(super) struct Lloyd<'a, R: Rng> {
    z: &'a Matrix,
    k: usize,
    rng: &'a mut R,
}

pub(super) fn lloyd<'a, R: Rng>(z: &'a Matrix, k: usize, rng: &'a mut R) -> Lloyd<'a, R> {
    Lloyd { z, k, rng }
}

impl<R: Rng> Lloyd<'_, R> {
    pub(super) fn run(mut self) -> (Matrix, f64) {
        let (centroids, sse, _) = self.run_traced();
        (centroids, sse)
    }

    /// Runs to convergence, also returning the per-iteration SSE sequence
    /// (each measured at the assignment step, so it is non-increasing).
    pub(super) fn run_traced(&mut self) -> (Matrix, f64, Vec<f64>) {
        let mut centroids = self.init_plus_plus();
        let mut trace = Vec::new();
        for _ in 0..MAX_ITERATIONS {
            let (labels, sse) = assignments(self.z, &centroids);
            trace.push(sse);
            let updated = self.update_centroids(&centroids, &labels);
            let shift = max_shift(&centroids, &updated);
            centroids = updated;
            if shift < SHIFT_TOLERANCE {
                break;
            }
        }
        let (_, sse) = assignments(self.z, &centroids);
        trace.push(sse);
        (centroids, sse, trace)
    }

    /// k-means++ D² seeding.
    fn init_plus_plus(&mut self) -> Matrix {
        let n = self.z.rows();
        let mut centroids = Matrix::zeros(self.k, self.z.cols());
        let first = self.rng.random_range(0..n);
        centroids.row_mut(0).copy_from_slice(self.z.row(first));

        let mut weights: Vec<f64> = (0..n)
            .map(|i| sq_dist(self.z.row(i), centroids.row(0)))
            .collect();
        for c in 1..self.k {
            let total: f64 = weights.iter().sum();
            let pick = if total > 0.0 {
                let mut target = self.rng.random_range(0.0..total);
                let mut chosen = n - 1;
                for (i, w) in weights.iter().enumerate() {
                    target -= w;
                    if target <= 0.0 {
                        chosen = i;
                        break;
                    }
                }
                chosen
            } else {
                // All remaining points coincide with a centroid.
                self.rng.random_range(0..n)
            };
            centroids.row_mut(c).copy_from_slice(self.z.row(pick));
            for (i, w) in weights.iter_mut().enumerate() {
                *w = w.min(sq_dist(self.z.row(i), centroids.row(c)));
            }
        }
        centroids
    }

    fn update_centroids(&mut self, current: &Matrix, labels: &[usize]) -> Matrix {
        let d = self.z.cols();
        let mut sums = Matrix::zeros(self.k, d);
        let mut counts = vec![0usize; self.k];
        for (i, &label) in labels.iter().enumerate() {
            counts[label] += 1;
            let row = self.z.row(i);
            let sum = sums.row_mut(label);
            for j in 0..d {
                sum[j] += row[j];
            }
        }
        let mut updated = Matrix::zeros(self.k, d);
        for c in 0..self.k {
            if counts[c] > 0 {
                let sum = sums.row(c);
                let out = updated.row_mut(c);
                for j in 0..d {
                    out[j] = sum[j] / counts[c] as f64;
                }
            } else {
                updated.row_mut(c).copy_from_slice(current.row(c));
            }
        }
        self.repair_empty(&mut updated, labels, &counts);
        updated
    }

    /// Reseeds each empty centroid at the point currently farthest from its
    /// own centroid, one point per empty cluster. Keeps k constant, which the
    /// fixed-width encoding downstream requires.
    fn repair_empty(&mut self, centroids: &mut Matrix, labels: &[usize], counts: &[usize]) {
        let mut used: Vec<usize> = Vec::new();
        for c in 0..self.k {
            if counts[c] > 0 {
                continue;
            }
            let mut farthest = (None, -1.0);
            for (i, &label) in labels.iter().enumerate() {
                if used.contains(&i) {
                    continue;
                }
                let d = sq_dist(self.z.row(i), centroids.row(label));
                if d > farthest.1 {
                    farthest = (Some(i), d);
                }
            }
            if let Some(i) = farthest.0 {
                used.push(i);
                let point = self.z.row(i).to_vec();
                centroids.row_mut(c).copy_from_slice(&point);
            }
        }
    }
}

pub(super) fn assignments(z: &Matrix, centroids: &Matrix) -> (Vec<usize>, f64) {
    let mut labels = Vec::with_capacity(z.rows());
    let mut sse = 0.0;
    for row in z.iter_rows() {
        let (label, d) = nearest(centroids, row);
        labels.push(label);
        sse += d;
    }
    (labels, sse)
}

fn max_shift(old: &Matrix, new: &Matrix) -> f64 {
    (0..old.rows())
        .map(|c| sq_dist(old.row(c), new.row(c)).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Matrix {
        Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ])
    }

    #[test]
    fn two_blobs_split_cleanly() {
        let m = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.4, 0.1],
            vec![10.0, 9.0],
            vec![10.2, 9.3],
        ]);
        let model = fit_kmeans(&m, 2, 7, 20).unwrap();
        let labels = assign(&model, &m).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn n_equals_k_reaches_zero_sse() {
        let m = square();
        let model = fit_kmeans(&m, 4, 3, 20).unwrap();
        let sse = compute_sse(&model, &m).unwrap();
        assert!(sse.abs() < 1e-18, "sse = {sse}");
    }

    #[test]
    fn fit_is_deterministic() {
        let m = square();
        let a = fit_kmeans(&m, 2, 42, 5).unwrap();
        let b = fit_kmeans(&m, 2, 42, 5).unwrap();
        assert_eq!(a, b);
        let c = fit_kmeans(&m, 2, 43, 5).unwrap();
        assert_eq!(a.k, c.k);
    }

    #[test]
    fn too_few_rows_and_zero_k() {
        let m = square();
        assert!(matches!(
            fit_kmeans(&m, 5, 1, 1).unwrap_err(),
            ClusterError::TooFewRows { rows: 4, k: 5 }
        ));
        assert!(matches!(fit_kmeans(&m, 0, 1, 1).unwrap_err(), ClusterError::ZeroK));
    }

    #[test]
    fn non_finite_input_is_located() {
        let mut m = square();
        m.set(2, 1, f64::NAN);
        assert!(matches!(
            fit_kmeans(&m, 2, 1, 1).unwrap_err(),
            ClusterError::NonFiniteInput { row: 2, col: 1 }
        ));
    }

    #[test]
    fn zero_variance_columns_are_recorded_and_ignored() {
        let m = Matrix::from_rows(&[
            vec![5.0, 0.0, 1.0],
            vec![5.0, 1.0, 2.0],
            vec![5.0, 10.0, 3.0],
            vec![5.0, 11.0, 4.0],
        ]);
        let model = fit_kmeans(&m, 2, 7, 10).unwrap();
        assert_eq!(model.excluded_columns, [0]);
        assert_eq!(model.column_stds[0], 1.0);
        // A wild value in the constant column must not affect assignment.
        let probe = Matrix::from_rows(&[vec![999.0, 0.5, 1.5], vec![5.0, 0.5, 1.5]]);
        let labels = assign(&model, &probe).unwrap();
        assert_eq!(labels[0], labels[1]);
    }

    #[test]
    fn assign_rejects_wrong_width() {
        let model = fit_kmeans(&square(), 2, 7, 5).unwrap();
        let narrow = Matrix::from_rows(&[vec![1.0]]);
        assert!(matches!(
            assign(&model, &narrow).unwrap_err(),
            ClusterError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn assigning_fit_matrix_matches_fit_assignment_sse() {
        let m = Matrix::from_rows(&[
            vec![0.0, 0.1],
            vec![0.2, 0.0],
            vec![5.0, 5.2],
            vec![5.1, 4.9],
            vec![9.0, 0.3],
            vec![8.8, 0.1],
        ]);
        let model = fit_kmeans(&m, 3, 11, 10).unwrap();
        let labels = assign(&model, &m).unwrap();
        let repeat = assign(&model, &m).unwrap();
        assert_eq!(labels, repeat);
        // Every point sits in a non-empty cluster and SSE is tiny for 3 blobs.
        let mut counts = [0; 3];
        for &l in &labels {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c == 2), "{counts:?}");
    }

    #[test]
    fn sse_trace_is_non_increasing() {
        let m = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.5, 1.0],
            vec![8.0, 8.0],
            vec![9.0, 8.5],
            vec![8.5, 9.0],
            vec![0.0, 9.0],
            vec![1.0, 8.5],
        ]);
        let (means, stds, excluded) = scaling_parameters(&m);
        let z = standardize(&m, &means, &stds, &excluded);
        for stream in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            rng.set_stream(stream);
            let (_, _, trace) = lloyd(&z, 3, &mut rng).run_traced();
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "trace not monotone: {trace:?}");
            }
        }
    }
}
