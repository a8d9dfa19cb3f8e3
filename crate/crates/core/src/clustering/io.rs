//! Cluster model and selection-report serialization.
//!
//! A model is stored as a centroid CSV (header = canonical columns, one row
//! per centroid) plus a JSON sidecar holding k, seed, fit patches, scaling
//! vectors, and excluded columns. Floats are written in shortest
//! round-tripping form, so save/load is value-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClusterError, ClusterModel, KSelectionReport};
use crate::matrix::Matrix;

#[derive(Serialize, Deserialize)]
struct ModelMetadata {
    k: usize,
    seed: u64,
    fit_patches: Vec<String>,
    column_means: Vec<f64>,
    column_stds: Vec<f64>,
    excluded_columns: Vec<String>,
}

fn file_err(path: &Path, detail: impl ToString) -> ClusterError {
    ClusterError::ModelFile { path: path.to_path_buf(), detail: detail.to_string() }
}

impl ClusterModel {
    pub fn save(&self, centroids_path: &Path, metadata_path: &Path) -> Result<(), ClusterError> {
        let mut writer =
            csv::Writer::from_path(centroids_path).map_err(|e| file_err(centroids_path, e))?;
        writer
            .write_record(&self.columns)
            .and_then(|_| {
                for c in 0..self.centroids.rows() {
                    let row: Vec<String> =
                        self.centroids.row(c).iter().map(f64::to_string).collect();
                    writer.write_record(&row)?;
                }
                Ok(())
            })
            .map_err(|e| file_err(centroids_path, e))?;
        writer.flush().map_err(|e| file_err(centroids_path, e))?;

        let metadata = ModelMetadata {
            k: self.k,
            seed: self.seed,
            fit_patches: self.fit_patches.clone(),
            column_means: self.column_means.clone(),
            column_stds: self.column_stds.clone(),
            excluded_columns: self
                .excluded_column_names()
                .into_iter()
                .map(str::to_string)
                .collect(),
        };
        let text = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
        fs::write(metadata_path, text).map_err(|e| file_err(metadata_path, e))
    }

    pub fn load(centroids_path: &Path, metadata_path: &Path) -> Result<Self, ClusterError> {
        let mut reader =
            csv::Reader::from_path(centroids_path).map_err(|e| file_err(centroids_path, e))?;
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| file_err(centroids_path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| file_err(centroids_path, e))?;
            if record.len() != columns.len() {
                return Err(file_err(
                    centroids_path,
                    format!("centroid row {} has {} fields, expected {}", rows.len() + 1, record.len(), columns.len()),
                ));
            }
            let row: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| file_err(centroids_path, e))?);
        }

        let text = fs::read_to_string(metadata_path).map_err(|e| file_err(metadata_path, e))?;
        let metadata: ModelMetadata =
            serde_json::from_str(&text).map_err(|e| file_err(metadata_path, e))?;

        if metadata.k != rows.len() {
            return Err(file_err(
                metadata_path,
                format!("metadata k={} but centroid file has {} rows", metadata.k, rows.len()),
            ));
        }
        if metadata.column_means.len() != columns.len()
            || metadata.column_stds.len() != columns.len()
        {
            return Err(file_err(
                metadata_path,
                format!(
                    "scaling vectors ({} means, {} stds) disagree with {} columns",
                    metadata.column_means.len(),
                    metadata.column_stds.len(),
                    columns.len()
                ),
            ));
        }
        let mut excluded_columns = Vec::with_capacity(metadata.excluded_columns.len());
        for name in &metadata.excluded_columns {
            match columns.iter().position(|c| c == name) {
                Some(i) => excluded_columns.push(i),
                None => {
                    return Err(file_err(
                        metadata_path,
                        format!("excluded column {name:?} not present in centroid header"),
                    ))
                }
            }
        }
        excluded_columns.sort_unstable();

        Ok(ClusterModel {
            k: metadata.k,
            columns,
            centroids: Matrix::from_rows(&rows),
            column_means: metadata.column_means,
            column_stds: metadata.column_stds,
            excluded_columns,
            fit_patches: metadata.fit_patches,
            seed: metadata.seed,
        })
    }
}

impl KSelectionReport {
    /// Writes the `k,sse,silhouette` scan table for external plotting.
    pub fn write_csv(&self, path: &Path) -> Result<(), ClusterError> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| file_err(path, e))?;
        writer
            .write_record(["k", "sse", "silhouette"])
            .map_err(|e| file_err(path, e))?;
        for (k, sse) in &self.sse_by_k {
            let silhouette = self.silhouette_by_k.get(k).copied().unwrap_or(f64::NAN);
            writer
                .write_record(&[k.to_string(), sse.to_string(), silhouette.to_string()])
                .map_err(|e| file_err(path, e))?;
        }
        writer.flush().map_err(|e| file_err(path, e))
    }
}
