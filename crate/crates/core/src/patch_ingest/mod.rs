//! Per-patch constants ingestion.
//!
//! Reads the three OpenDota-style constants files for one patch (hero to
//! ability mapping, ability properties, hero attributes), normalizes the raw
//! property soup into numeric canonical columns, and appends per-hero
//! attribute columns so every row describes one (character, ability) pair.

mod alias;
mod csv_io;
mod normalize;
mod parse;

pub use alias::{AliasMap, AliasRule};
pub use csv_io::{load_feature_table, load_feature_table_expecting, persist_feature_table};
pub use normalize::{attach_hero_attributes, normalize_properties};
pub use parse::parse_patch_constants;

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// A raw ability property value as found in the constants files.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Text(String),
    /// Per-level progression, e.g. "30 / 40 / 50".
    Levels(Vec<f64>),
}

/// One ability of one character, with properties still untransformed.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAbilityEntry {
    pub character: String,
    pub ability: String,
    pub properties: BTreeMap<String, RawValue>,
}

/// All playable abilities of one patch, pre-normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAbilityTable {
    pub patch: String,
    pub entries: Vec<RawAbilityEntry>,
}

/// A hero's primary attribute. `Universal` only exists in real data from
/// patch 7.33 on, but the parser accepts it for any patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimaryAttribute {
    Strength,
    Agility,
    Intelligence,
    Universal,
}

impl PrimaryAttribute {
    pub fn as_str(self) -> &'static str {
        match self {
            PrimaryAttribute::Strength => "strength",
            PrimaryAttribute::Agility => "agility",
            PrimaryAttribute::Intelligence => "intelligence",
            PrimaryAttribute::Universal => "universal",
        }
    }
}

/// Per-hero attribute block from the heroes constants file.
///
/// `hero_id` is the game's sparse integer identifier. It is carried for
/// joining against match records and is never emitted as a feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct HeroAttributeRecord {
    pub character: String,
    pub hero_id: u32,
    pub primary_attribute: PrimaryAttribute,
    pub stats: BTreeMap<String, f64>,
}

/// One standardized feature row: numeric values aligned to the table columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub character: String,
    pub ability: String,
    pub values: Vec<f64>,
}

/// Standardized numeric ability table for one patch.
///
/// Columns are canonical property names in lexicographic order; absent
/// properties are 0. Hero attribute columns, when attached, repeat identically
/// across all rows of one character.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedAbilityTable {
    pub patch: String,
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl StandardizedAbilityTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }

    /// Distinct characters in row order of first appearance.
    pub fn characters(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for row in &self.rows {
            if !seen.contains(&row.character.as_str()) {
                seen.push(row.character.as_str());
            }
        }
        seen
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed document {path}: {detail}")]
    MalformedDocument { path: PathBuf, detail: String },
    #[error("ability {ability:?} belongs to {character:?}, which is absent from the heroes file")]
    UnknownHeroReference { character: String, ability: String },
    #[error("no hero attribute record for character {character:?}")]
    MissingHeroRecord { character: String },
    #[error("feature table schema mismatch: {detail}")]
    SchemaMismatch { detail: String },
    #[error("invalid alias map: {detail}")]
    InvalidAliasMap { detail: String },
}
