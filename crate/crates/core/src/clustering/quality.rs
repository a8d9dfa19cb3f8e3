//! Cluster-quality measures: silhouette score and the K elbow scan.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kmeans::{assignments, lloyd, scaling_parameters, standardize};
use super::{ClusterError, KSelectionReport};
use crate::matrix::{dist, Matrix};

/// Mean silhouette over all points, distances taken in the coordinates of
/// `matrix` as given (the caller decides raw vs standardized space).
///
/// For each point: a = mean distance to its own cluster's other members,
/// b = smallest mean distance to any other cluster, score = (b-a)/max(a,b).
/// Points in singleton clusters contribute 0.
pub fn compute_silhouette(matrix: &Matrix, labels: &[usize]) -> Result<f64, ClusterError> {
    if labels.len() != matrix.rows() {
        return Err(ClusterError::DimensionMismatch {
            detail: format!("{} labels for {} rows", labels.len(), matrix.rows()),
        });
    }
    if labels.is_empty() {
        return Err(ClusterError::EmptyLabelSet);
    }
    let dists = pairwise(matrix);
    silhouette_from_distances(&dists, labels)
}

fn pairwise(matrix: &Matrix) -> Matrix {
    let n = matrix.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dist(matrix.row(i), matrix.row(j));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

fn silhouette_from_distances(dists: &Matrix, labels: &[usize]) -> Result<f64, ClusterError> {
    let n = labels.len();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        members.entry(label).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(ClusterError::SingleCluster);
    }

    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let own = &members[&label];
        if own.len() == 1 {
            continue; // singleton contributes 0
        }
        let a = own
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| dists.get(i, j))
            .sum::<f64>()
            / (own.len() - 1) as f64;
        let b = members
            .iter()
            .filter(|(&other, _)| other != label)
            .map(|(_, points)| {
                points.iter().map(|&j| dists.get(i, j)).sum::<f64>() / points.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Scans K over `[k_min, k_max]`, recording SSE (the elbow curve) and the
/// silhouette of each fit, and picks the K with the highest silhouette,
/// ties toward smaller K.
///
/// All fits share one standardization of `matrix`; per-K fits follow the same
/// seeded restart scheme as [`super::fit_kmeans`], so refitting the chosen K
/// reproduces the scanned model exactly. A K whose fit degenerates to fewer
/// than two occupied clusters (notably K = 1) records silhouette -1.
pub fn select_k(
    matrix: &Matrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Result<KSelectionReport, ClusterError> {
    if k_min == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k_min > k_max {
        return Err(ClusterError::DimensionMismatch {
            detail: format!("k_min {k_min} exceeds k_max {k_max}"),
        });
    }
    if matrix.rows() < k_max {
        return Err(ClusterError::TooFewRows { rows: matrix.rows(), k: k_max });
    }
    for i in 0..matrix.rows() {
        for (j, v) in matrix.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(ClusterError::NonFiniteInput { row: i, col: j });
            }
        }
    }

    let (means, stds, excluded) = scaling_parameters(matrix);
    let z = standardize(matrix, &means, &stds, &excluded);
    let dists = pairwise(&z);

    let mut sse_by_k = BTreeMap::new();
    let mut silhouette_by_k = BTreeMap::new();
    let mut chosen = (k_min, f64::NEG_INFINITY);
    for k in k_min..=k_max {
        let mut best: Option<(Matrix, f64)> = None;
        for restart in 0..restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            let (centroids, sse) = lloyd(&z, k, &mut rng).run();
            if best.as_ref().is_none_or(|(_, b)| sse < *b) {
                best = Some((centroids, sse));
            }
        }
        let (centroids, sse) = best.expect("restarts >= 1");
        let (labels, _) = assignments(&z, &centroids);
        let silhouette = match silhouette_from_distances(&dists, &labels) {
            Ok(s) => s,
            Err(ClusterError::SingleCluster) => -1.0,
            Err(e) => return Err(e),
        };
        sse_by_k.insert(k, sse);
        silhouette_by_k.insert(k, silhouette);
        if silhouette > chosen.1 {
            chosen = (k, silhouette);
        }
    }

    Ok(KSelectionReport {
        sse_by_k,
        silhouette_by_k,
        elbow_range: (k_min, k_max),
        chosen_k: chosen.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn tight_far_blobs_score_high() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.05).unwrap();
        for b in 0..2 {
            for _ in 0..20 {
                let cx = b as f64 * 30.0;
                rows.push(vec![cx + noise.sample(&mut rng), noise.sample(&mut rng)]);
                labels.push(b);
            }
        }
        let s = compute_silhouette(&Matrix::from_rows(&rows), &labels).unwrap();
        assert!(s > 0.9, "s = {s}");
    }

    #[test]
    fn random_labels_on_one_blob_score_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![noise.sample(&mut rng), noise.sample(&mut rng)])
            .collect();
        let labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..2)).collect();
        let s = compute_silhouette(&Matrix::from_rows(&rows), &labels).unwrap();
        assert!(s.abs() < 0.1, "s = {s}");
    }

    #[test]
    fn two_singletons_score_zero() {
        let m = Matrix::from_rows(&[vec![0.0], vec![5.0]]);
        assert_eq!(compute_silhouette(&m, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn one_cluster_is_rejected() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        assert!(matches!(
            compute_silhouette(&m, &[3, 3, 3]).unwrap_err(),
            ClusterError::SingleCluster
        ));
    }

    fn gaussian_blobs(centers: &[(f64, f64)], per_blob: usize, sigma: f64, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let rows: Vec<Vec<f64>> = centers
            .iter()
            .flat_map(|&(cx, cy)| {
                (0..per_blob)
                    .map(|_| vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng)])
                    .collect::<Vec<_>>()
            })
            .collect();
        Matrix::from_rows(&rows)
    }

    #[test]
    fn five_blobs_select_k_five() {
        let centers = [(0.0, 0.0), (40.0, 0.0), (0.0, 40.0), (40.0, 40.0), (20.0, 80.0)];
        let m = gaussian_blobs(&centers, 20, 1.0, 23);
        let report = select_k(&m, 2, 10, 7, 10).unwrap();
        assert_eq!(report.chosen_k, 5);
        assert_eq!(report.elbow_range, (2, 10));
        assert_eq!(report.sse_by_k.len(), 9);
        // SSE at the true K should be far below the 2-cluster fit.
        assert!(report.sse_by_k[&5] < report.sse_by_k[&2] / 4.0);
    }

    #[test]
    fn degenerate_single_k_range() {
        let m = gaussian_blobs(&[(0.0, 0.0), (10.0, 10.0), (20.0, 0.0)], 5, 0.3, 3);
        let report = select_k(&m, 3, 3, 1, 5).unwrap();
        assert_eq!(report.chosen_k, 3);
    }

    #[test]
    fn k_of_one_records_worst_silhouette() {
        // Separation in both coordinates, so standardization keeps the two
        // blobs tight relative to the gap.
        let m = gaussian_blobs(&[(0.0, 0.0), (30.0, 30.0)], 10, 0.5, 9);
        let report = select_k(&m, 1, 3, 7, 5).unwrap();
        assert_eq!(report.silhouette_by_k[&1], -1.0);
        assert!(report.silhouette_by_k[&2] > 0.9);
        assert_eq!(report.chosen_k, 2);
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let m = gaussian_blobs(&[(0.0, 0.0)], 4, 0.5, 1);
        assert!(matches!(select_k(&m, 0, 2, 1, 1).unwrap_err(), ClusterError::ZeroK));
        assert!(matches!(
            select_k(&m, 3, 2, 1, 1).unwrap_err(),
            ClusterError::DimensionMismatch { .. }
        ));
        assert!(matches!(
            select_k(&m, 2, 9, 1, 1).unwrap_err(),
            ClusterError::TooFewRows { .. }
        ));
    }
}
