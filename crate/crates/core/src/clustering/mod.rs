//! K-Means over standardized ability features.
//!
//! A model is fit once on reference patches and then frozen: abilities from
//! later patches are assigned to the existing centroids without refitting, so
//! cluster indices keep their meaning across patches. Schema growth (columns
//! the model has never seen) is rejected rather than absorbed; that rejection
//! is the detector for breaking patch changes.

mod drift;
mod io;
mod kmeans;
mod quality;

pub use drift::{drift_divergence, DriftReport};
pub use kmeans::{assign, assign_table, compute_sse, fit_kmeans, fit_kmeans_features};
pub use quality::{compute_silhouette, select_k};

use std::collections::BTreeSet;
use std::path::PathBuf;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::patch_ingest::StandardizedAbilityTable;

/// A frozen K-Means model: centroids in z-scored feature space plus the
/// scaling parameters needed to map raw rows into that space.
///
/// Zero-variance fit columns are excluded from the distance metric; their
/// stored std is 1.0 and their index appears in `excluded_columns`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub columns: Vec<String>,
    /// k x D, in standardized space (excluded dimensions held at 0).
    pub centroids: Matrix,
    pub column_means: Vec<f64>,
    pub column_stds: Vec<f64>,
    pub excluded_columns: Vec<usize>,
    pub fit_patches: Vec<String>,
    pub seed: u64,
}

impl ClusterModel {
    pub fn dims(&self) -> usize {
        self.columns.len()
    }

    pub fn excluded_column_names(&self) -> Vec<&str> {
        self.excluded_columns.iter().map(|&i| self.columns[i].as_str()).collect()
    }

    /// Maps a raw-space row into the model's standardized space.
    pub(crate) fn standardize_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, value) in row.iter().enumerate() {
            out[j] = (value - self.column_means[j]) / self.column_stds[j];
        }
        for &j in &self.excluded_columns {
            out[j] = 0.0;
        }
    }

    /// Projects a standardized table onto the model's column set.
    ///
    /// Columns the model knows but the table lacks read as 0 (the absent
    /// property convention). Columns the table has but the model has never
    /// seen are a breaking change and are rejected by name.
    pub fn project_table(&self, table: &StandardizedAbilityTable) -> Result<Matrix, ClusterError> {
        let known: BTreeSet<&str> = self.columns.iter().map(String::as_str).collect();
        let unseen: Vec<String> = table
            .columns
            .iter()
            .filter(|c| !known.contains(c.as_str()))
            .cloned()
            .collect();
        if !unseen.is_empty() {
            return Err(ClusterError::DimensionMismatch {
                detail: format!("table has columns unseen at fit time: {unseen:?}"),
            });
        }
        let mut out = Matrix::zeros(table.rows.len(), self.dims());
        for (i, row) in table.rows.iter().enumerate() {
            for (j, column) in self.columns.iter().enumerate() {
                if let Some(t) = table.column_index(column) {
                    out.set(i, j, row.values[t]);
                }
            }
        }
        Ok(out)
    }
}

/// A feature table (or several, column-aligned) in numeric matrix form,
/// with the (patch, character, ability) key of every row retained.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub matrix: Matrix,
    pub keys: Vec<RowKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowKey {
    pub patch: String,
    pub character: String,
    pub ability: String,
}

impl FeatureMatrix {
    /// Stacks tables over the union of their columns, absent values as 0.
    pub fn from_tables(tables: &[StandardizedAbilityTable]) -> Self {
        let columns: Vec<String> = tables
            .iter()
            .flat_map(|t| t.columns.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n: usize = tables.iter().map(|t| t.rows.len()).sum();
        let mut matrix = Matrix::zeros(n, columns.len());
        let mut keys = Vec::with_capacity(n);
        let mut i = 0;
        for table in tables {
            let positions: Vec<Option<usize>> =
                columns.iter().map(|c| table.column_index(c)).collect();
            for row in &table.rows {
                for (j, pos) in positions.iter().enumerate() {
                    if let Some(t) = pos {
                        matrix.set(i, j, row.values[*t]);
                    }
                }
                keys.push(RowKey {
                    patch: table.patch.clone(),
                    character: row.character.clone(),
                    ability: row.ability.clone(),
                });
                i += 1;
            }
        }
        FeatureMatrix { columns, matrix, keys }
    }

    /// Distinct source patches in first-appearance order.
    pub fn patches(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for key in &self.keys {
            if !out.contains(&key.patch) {
                out.push(key.patch.clone());
            }
        }
        out
    }
}

/// Elbow-scan result: SSE and silhouette per candidate K.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelectionReport {
    pub sse_by_k: std::collections::BTreeMap<usize, f64>,
    pub silhouette_by_k: std::collections::BTreeMap<usize, f64>,
    pub elbow_range: (usize, usize),
    pub chosen_k: usize,
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("{rows} rows cannot support k={k}")]
    TooFewRows { rows: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("silhouette needs at least 2 distinct clusters")]
    SingleCluster,
    #[error("label set is empty")]
    EmptyLabelSet,
    #[error("label {label} out of range for k={k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("model file {path}: {detail}")]
    ModelFile { path: PathBuf, detail: String },
}
