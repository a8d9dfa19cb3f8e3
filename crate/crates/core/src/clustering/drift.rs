//! Assignment-distribution drift between two patches.

use serde::Serialize;

use super::ClusterError;

/// Comparison of two patches' cluster-assignment distributions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub reference_histogram: Vec<f64>,
    pub new_histogram: Vec<f64>,
    /// Jensen-Shannon divergence, natural log, in [0, ln 2].
    pub divergence: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Compares two label multisets over the same k clusters.
///
/// Histograms use add-one smoothing before normalization so empty clusters
/// never zero out the divergence terms. Flagged when the Jensen-Shannon
/// divergence exceeds `threshold` (0.05 is the conventional default).
pub fn drift_divergence(
    reference_labels: &[usize],
    new_labels: &[usize],
    k: usize,
    threshold: f64,
) -> Result<DriftReport, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if reference_labels.is_empty() || new_labels.is_empty() {
        return Err(ClusterError::EmptyLabelSet);
    }
    let reference_histogram = smoothed_histogram(reference_labels, k)?;
    let new_histogram = smoothed_histogram(new_labels, k)?;
    let divergence = jensen_shannon(&reference_histogram, &new_histogram);
    Ok(DriftReport {
        reference_histogram,
        new_histogram,
        divergence,
        threshold,
        flagged: divergence > threshold,
    })
}

fn smoothed_histogram(labels: &[usize], k: usize) -> Result<Vec<f64>, ClusterError> {
    let mut counts = vec![1.0; k];
    for &label in labels {
        if label >= k {
            return Err(ClusterError::LabelOutOfRange { label, k });
        }
        counts[label] += 1.0;
    }
    let total = labels.len() as f64 + k as f64;
    for c in &mut counts {
        *c /= total;
    }
    Ok(counts)
}

fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| if x > 0.0 { x * (x / y).ln() } else { 0.0 })
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(&x, &y)| 0.5 * (x + y)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_multisets_have_zero_divergence() {
        let labels = [0, 1, 1, 2, 0, 2, 2];
        let report = drift_divergence(&labels, &labels, 3, 0.05).unwrap();
        assert_eq!(report.divergence, 0.0);
        assert!(!report.flagged);
        assert!((report.reference_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_support_approaches_ln_two() {
        let reference = vec![0usize; 10_000];
        let moved = vec![1usize; 10_000];
        let report = drift_divergence(&reference, &moved, 2, 0.05).unwrap();
        assert!((report.divergence - std::f64::consts::LN_2).abs() < 0.02, "{}", report.divergence);
        assert!(report.flagged);
    }

    #[test]
    fn resampled_same_proportions_is_tiny() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
            (0..10_000)
                .map(|_| {
                    let x: f64 = rng.random_range(0.0..1.0);
                    if x < 0.5 {
                        0
                    } else if x < 0.8 {
                        1
                    } else {
                        2
                    }
                })
                .collect()
        };
        let a = sample(&mut rng);
        let b = sample(&mut rng);
        let report = drift_divergence(&a, &b, 3, 0.05).unwrap();
        assert!(report.divergence < 0.01, "{}", report.divergence);
        assert!(!report.flagged);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(
            drift_divergence(&[], &[0], 2, 0.05).unwrap_err(),
            ClusterError::EmptyLabelSet
        ));
        assert!(matches!(
            drift_divergence(&[0], &[5], 3, 0.05).unwrap_err(),
            ClusterError::LabelOutOfRange { label: 5, k: 3 }
        ));
        assert!(matches!(drift_divergence(&[0], &[0], 0, 0.05).unwrap_err(), ClusterError::ZeroK));
    }

    #[test]
    fn divergence_is_symmetric() {
        let a = [0, 0, 0, 1, 2];
        let b = [1, 1, 2, 2, 2];
        let ab = drift_divergence(&a, &b, 3, 0.05).unwrap().divergence;
        let ba = drift_divergence(&b, &a, 3, 0.05).unwrap().divergence;
        assert!((ab - ba).abs() < 1e-15);
        assert!(ab > 0.0);
    }
}
