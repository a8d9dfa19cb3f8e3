//! Kill-race ranking quality, tie behavior, and report files.
//!
//! A match is scored by which team a predictor expects to out-kill the
//! other. The headline metric is the probability that a randomly chosen
//! radiant-ahead match gets a higher predicted kill difference than a
//! randomly chosen dire-ahead match, with prediction ties credited half.
//! Matches whose actual kill counts are equal carry no ranking information
//! and are excluded, but counted.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::model::TrainHistory;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {predictions} predictions vs {actuals} actuals")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("ranking undefined: {detail}")]
    DegenerateLabels { detail: String },
    #[error("non-finite prediction at index {index}")]
    NonFinitePrediction { index: usize },
    #[error("report file {path}: {detail}")]
    ReportFile { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucDetail {
    pub auc: f64,
    /// Matches ranked after exclusions.
    pub n_used: usize,
    /// Matches dropped because their actual kill counts were equal.
    pub excluded_tied_actuals: usize,
}

/// Probability-of-correct-ranking for the kill race, computed from average
/// ranks so that tied predicted differences contribute exactly one half.
///
/// Errors if the inputs disagree in length, any prediction is non-finite,
/// or exclusion leaves no radiant-ahead or no dire-ahead matches.
pub fn auc_kill_race(
    predictions: &[(f64, f64)],
    actuals: &[(f64, f64)],
) -> Result<AucDetail, EvalError> {
    if predictions.len() != actuals.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(predictions.len());
    let mut excluded = 0usize;
    for (i, ((pr, pd), (ar, ad))) in predictions.iter().zip(actuals).enumerate() {
        let score = pr - pd;
        if !score.is_finite() {
            return Err(EvalError::NonFinitePrediction { index: i });
        }
        if ar == ad {
            excluded += 1;
            continue;
        }
        scored.push((score, ar > ad));
    }
    let n_pos = scored.iter().filter(|&&(_, label)| label).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::DegenerateLabels {
            detail: format!(
                "{n_pos} radiant-ahead and {n_neg} dire-ahead matches after excluding {excluded} ties"
            ),
        });
    }

    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    // Average 1-based ranks across runs of equal scores, then Mann-Whitney.
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < scored.len() {
        let mut end = start + 1;
        while end < scored.len() && scored[end].0 == scored[start].0 {
            end += 1;
        }
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        positive_rank_sum +=
            mean_rank * scored[start..end].iter().filter(|&&(_, label)| label).count() as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    let u = positive_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(AucDetail {
        auc: u / (n_pos_f * n_neg as f64),
        n_used: scored.len(),
        excluded_tied_actuals: excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TieStats {
    pub n: usize,
    pub tie_count: usize,
    pub tie_fraction: f64,
}

/// How often a predictor's outputs, rounded to whole non-negative kills,
/// claim the race is exactly even.
pub fn tie_stats(predictions: &[(f64, f64)]) -> TieStats {
    let tie_count = predictions
        .iter()
        .filter(|(pr, pd)| pr.round().max(0.0) == pd.round().max(0.0))
        .count();
    let tie_fraction =
        if predictions.is_empty() { 0.0 } else { tie_count as f64 / predictions.len() as f64 };
    TieStats { n: predictions.len(), tie_count, tie_fraction }
}

/// One predictor's performance on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n_matches: usize,
    pub excluded_tied_actuals: usize,
    pub auc: f64,
    /// Mean squared error per team in raw kill space.
    pub mse: f64,
    pub tie_count: usize,
    pub tie_fraction: f64,
}

pub fn evaluate(
    dataset: &str,
    predictions: &[(f64, f64)],
    actuals: &[(f64, f64)],
) -> Result<EvalReport, EvalError> {
    let detail = auc_kill_race(predictions, actuals)?;
    let ties = tie_stats(predictions);
    let mse = predictions
        .iter()
        .zip(actuals)
        .map(|((pr, pd), (ar, ad))| ((pr - ar).powi(2) + (pd - ad).powi(2)) / 2.0)
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        n_matches: predictions.len(),
        excluded_tied_actuals: detail.excluded_tied_actuals,
        auc: detail.auc,
        mse,
        tie_count: ties.tie_count,
        tie_fraction: ties.tie_fraction,
    })
}

/// One row of the cross-variant summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResults {
    pub model: String,
    pub test_auc: f64,
    pub test732_auc: f64,
    pub test733_auc: f64,
}

fn file_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |e| EvalError::ReportFile { path: path.to_path_buf(), detail: e.to_string() }
}

/// Writes the summary table: one row per predictor, AUC on the main test
/// set and the two later-patch holdouts.
pub fn write_summary_csv(rows: &[VariantResults], path: &Path) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(file_err(path))?;
    writer
        .write_record(["model", "test_auc", "test732_auc", "test733_auc"])
        .map_err(file_err(path))?;
    for row in rows {
        writer
            .write_record([
                row.model.clone(),
                row.test_auc.to_string(),
                row.test732_auc.to_string(),
                row.test733_auc.to_string(),
            ])
            .map_err(file_err(path))?;
    }
    writer.flush().map_err(|e| EvalError::ReportFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Writes per-dataset reports, ties included, one row per dataset.
pub fn write_report_csv(reports: &[EvalReport], path: &Path) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(file_err(path))?;
    writer
        .write_record([
            "dataset",
            "n_matches",
            "excluded_tied_actuals",
            "auc",
            "mse",
            "tie_count",
            "tie_fraction",
        ])
        .map_err(file_err(path))?;
    for r in reports {
        writer
            .write_record([
                r.dataset.clone(),
                r.n_matches.to_string(),
                r.excluded_tied_actuals.to_string(),
                r.auc.to_string(),
                r.mse.to_string(),
                r.tie_count.to_string(),
                r.tie_fraction.to_string(),
            ])
            .map_err(file_err(path))?;
    }
    writer.flush().map_err(|e| EvalError::ReportFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Writes per-epoch training curves.
pub fn write_curves_csv(history: &TrainHistory, path: &Path) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_path(path).map_err(file_err(path))?;
    writer
        .write_record(["epoch", "train_loss", "val_loss", "train_auc", "val_auc"])
        .map_err(file_err(path))?;
    for stats in &history.epochs {
        writer
            .write_record([
                stats.epoch.to_string(),
                stats.train_loss.to_string(),
                stats.val_loss.to_string(),
                stats.train_auc.to_string(),
                stats.val_auc.to_string(),
            ])
            .map_err(file_err(path))?;
    }
    writer.flush().map_err(|e| EvalError::ReportFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
