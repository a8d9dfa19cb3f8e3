//! Kill-count predictors: feature assembly and the multilayer perceptron.
//!
//! Three feature layouts share one target and one network shape, differing
//! only in how much lineup information they see:
//!
//! * duration only (1 input),
//! * duration plus per-team character-identity multi-hots,
//! * duration plus per-team ability-cluster count sums.
//!
//! The identity layout is welded to the id space it was trained on: a match
//! featuring a later-added character cannot be encoded at all. The count
//! layout only needs the new character's ability counts, which the
//! clustering side can produce for any patch.

mod io;
mod mlp;

pub use io::{load_model, save_model};
pub use mlp::{
    init_mlp, init_mlp_custom, predict_kills, scaled_hidden_widths, train, EpochStats, MlpModel,
    TrainConfig, TrainHistory, HIDDEN_WIDTHS, OUTPUT_DIM, TARGET_SCALE,
};

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{encode_character_ids, CharacterVector, EncodingError};
use crate::match_data::MatchRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Duration only.
    Nn1,
    /// Duration + per-team identity multi-hots.
    Nn2,
    /// Duration + per-team cluster-count sums.
    Nn3,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Nn1 => "nn1",
            Variant::Nn2 => "nn2",
            Variant::Nn3 => "nn3",
        }
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "nn1" => Ok(Variant::Nn1),
            "nn2" => Ok(Variant::Nn2),
            "nn3" => Ok(Variant::Nn3),
            other => Err(ModelError::ModelFile {
                path: PathBuf::new(),
                detail: format!("unknown variant {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("character id {id} outside trained id space 0..={max_id}")]
    IdOutOfRange { id: u32, max_id: u32 },
    #[error("no count vector for character id {hero_id} on patch {patch:?}")]
    UnknownCharacter { patch: String, hero_id: u32 },
    #[error("no hero id recorded for character {character:?}")]
    MissingHeroId { character: String },
    #[error("missing context: {detail}")]
    MissingContext { detail: String },
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("{what} set is empty")]
    EmptyDataset { what: &'static str },
    #[error("model file {path}: {detail}")]
    ModelFile { path: PathBuf, detail: String },
}

/// Everything needed to turn a [`MatchRecord`] into a feature vector, fixed
/// at training time and persisted with the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub variant: Variant,
    /// Duration standardization constants, estimated on the training set.
    pub duration_mean: f64,
    pub duration_std: f64,
    /// Identity space bound (ids 0..=id_space are encodable); Nn2 only.
    pub id_space: Option<u32>,
    /// Count-vector dimensionality; Nn3 only.
    pub k: Option<usize>,
}

impl FeatureSpec {
    pub fn nn1(train: &[MatchRecord]) -> Result<Self, ModelError> {
        let (duration_mean, duration_std) = duration_stats(train)?;
        Ok(FeatureSpec { variant: Variant::Nn1, duration_mean, duration_std, id_space: None, k: None })
    }

    /// `id_space` is the highest encodable id. Passing a bound above the
    /// training maximum reserves room for characters expected to arrive
    /// before the model is retired.
    pub fn nn2(train: &[MatchRecord], id_space: u32) -> Result<Self, ModelError> {
        let (duration_mean, duration_std) = duration_stats(train)?;
        Ok(FeatureSpec {
            variant: Variant::Nn2,
            duration_mean,
            duration_std,
            id_space: Some(id_space),
            k: None,
        })
    }

    pub fn nn3(train: &[MatchRecord], k: usize) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::DimensionMismatch { detail: "k must be > 0".into() });
        }
        let (duration_mean, duration_std) = duration_stats(train)?;
        Ok(FeatureSpec {
            variant: Variant::Nn3,
            duration_mean,
            duration_std,
            id_space: None,
            k: Some(k),
        })
    }

    pub fn input_dim(&self) -> usize {
        match self.variant {
            Variant::Nn1 => 1,
            Variant::Nn2 => {
                1 + 2 * (self.id_space.unwrap_or(0) as usize + 1)
            }
            Variant::Nn3 => 1 + 2 * self.k.unwrap_or(0),
        }
    }

    fn standardized_duration(&self, duration: u32) -> f64 {
        (f64::from(duration) - self.duration_mean) / self.duration_std
    }
}

/// Highest hero id appearing in any slot; `None` for an empty slice.
pub fn max_hero_id(records: &[MatchRecord]) -> Option<u32> {
    records.iter().flat_map(|r| r.heroes.iter().copied()).max()
}

fn duration_stats(train: &[MatchRecord]) -> Result<(f64, f64), ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyDataset { what: "train" });
    }
    let n = train.len() as f64;
    let mean = train.iter().map(|r| f64::from(r.duration)).sum::<f64>() / n;
    let var = train
        .iter()
        .map(|r| (f64::from(r.duration) - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    // Constant durations standardize to zero; divisor 1 keeps that finite.
    Ok((mean, if std > 0.0 { std } else { 1.0 }))
}

/// Count vectors addressable by (patch, hero id), the join the count-based
/// feature layout performs per match slot.
#[derive(Debug, Clone)]
pub struct CharacterVectorIndex {
    k: usize,
    by_patch_id: HashMap<(String, u32), Vec<u32>>,
}

impl CharacterVectorIndex {
    /// Joins count vectors to hero ids by character name. Every vector's
    /// character must have an id; every vector must have width `k`.
    pub fn build(
        vectors: &[CharacterVector],
        name_to_id: &BTreeMap<String, u32>,
        k: usize,
    ) -> Result<Self, ModelError> {
        let mut by_patch_id = HashMap::new();
        for vector in vectors {
            if vector.k() != k {
                return Err(ModelError::DimensionMismatch {
                    detail: format!(
                        "character {:?} has a {}-dim vector, expected {k}",
                        vector.character,
                        vector.k()
                    ),
                });
            }
            let id = *name_to_id
                .get(&vector.character)
                .ok_or_else(|| ModelError::MissingHeroId { character: vector.character.clone() })?;
            by_patch_id.insert((vector.patch.clone(), id), vector.counts.clone());
        }
        Ok(CharacterVectorIndex { k, by_patch_id })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.by_patch_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_patch_id.is_empty()
    }

    pub fn lookup(&self, patch: &str, hero_id: u32) -> Option<&Vec<u32>> {
        self.by_patch_id.get(&(patch.to_string(), hero_id))
    }
}

/// Assembles one feature vector. The count layout requires `index`; the
/// other layouts ignore it.
pub fn build_features(
    spec: &FeatureSpec,
    record: &MatchRecord,
    index: Option<&CharacterVectorIndex>,
) -> Result<Vec<f64>, ModelError> {
    let mut features = Vec::with_capacity(spec.input_dim());
    features.push(spec.standardized_duration(record.duration));
    match spec.variant {
        Variant::Nn1 => {}
        Variant::Nn2 => {
            let max_id = spec.id_space.ok_or_else(|| ModelError::MissingContext {
                detail: "identity layout without an id space".into(),
            })?;
            for team in [record.radiant_heroes(), record.dire_heroes()] {
                let encoded = encode_character_ids(team, max_id).map_err(encoding_error)?;
                features.extend(encoded.bits.iter().map(|&b| f64::from(b)));
            }
        }
        Variant::Nn3 => {
            let k = spec.k.ok_or_else(|| ModelError::MissingContext {
                detail: "count layout without a dimensionality".into(),
            })?;
            let index = index.ok_or_else(|| ModelError::MissingContext {
                detail: "count layout without a character vector index".into(),
            })?;
            if index.k() != k {
                return Err(ModelError::DimensionMismatch {
                    detail: format!("index holds {}-dim vectors, spec wants {k}", index.k()),
                });
            }
            for team in [record.radiant_heroes(), record.dire_heroes()] {
                let mut sums = vec![0u32; k];
                for &hero_id in team {
                    let counts =
                        index.lookup(&record.patch, hero_id).ok_or_else(|| {
                            ModelError::UnknownCharacter {
                                patch: record.patch.clone(),
                                hero_id,
                            }
                        })?;
                    for (total, c) in sums.iter_mut().zip(counts) {
                        *total += c;
                    }
                }
                features.extend(sums.iter().map(|&c| f64::from(c)));
            }
        }
    }
    debug_assert_eq!(features.len(), spec.input_dim());
    Ok(features)
}

fn encoding_error(e: EncodingError) -> ModelError {
    match e {
        EncodingError::IdOutOfRange { id, max_id } => ModelError::IdOutOfRange { id, max_id },
        other => ModelError::MissingContext { detail: other.to_string() },
    }
}

/// Feature rows paired with raw (radiant, dire) kill targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 2]>,
}

impl Dataset {
    pub fn from_matches(
        spec: &FeatureSpec,
        matches: &[MatchRecord],
        index: Option<&CharacterVectorIndex>,
    ) -> Result<Self, ModelError> {
        let mut features = Vec::with_capacity(matches.len());
        let mut targets = Vec::with_capacity(matches.len());
        for record in matches {
            features.push(build_features(spec, record, index)?);
            targets.push([f64::from(record.kills_radiant), f64::from(record.kills_dire)]);
        }
        Ok(Dataset { features, targets })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn check_width(&self, input_dim: usize) -> Result<(), ModelError> {
        for row in &self.features {
            if row.len() != input_dim {
                return Err(ModelError::DimensionMismatch {
                    detail: format!("feature row has {} values, model takes {input_dim}", row.len()),
                });
            }
        }
        Ok(())
    }
}
