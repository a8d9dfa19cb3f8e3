//! Fixed-width vector encodings of abilities, characters, and lineups.
//!
//! An ability is one-hot over its cluster label; a character is the count of
//! its abilities per cluster; a lineup is the elementwise sum of five
//! character vectors. All three have width K no matter how many characters
//! exist, which is what lets the representation absorb new characters. The
//! contrast case is the classic ID one-hot, whose width is pinned to the ID
//! space seen at training time and which must reject anything beyond it.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::clustering::RowKey;
use crate::patch_ingest::StandardizedAbilityTable;

/// Match team.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Team {
    Radiant,
    Dire,
}

impl Team {
    pub fn as_str(self) -> &'static str {
        match self {
            Team::Radiant => "radiant",
            Team::Dire => "dire",
        }
    }
}

/// Cluster-count vector of one character's abilities in one patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterVector {
    pub character: String,
    pub patch: String,
    pub counts: Vec<u32>,
}

impl CharacterVector {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total_abilities(&self) -> u32 {
        self.counts.iter().sum()
    }
}

/// Elementwise sum of a team's five character vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineupVector {
    pub team: Team,
    pub counts: Vec<u32>,
}

/// Multi-hot encoding over a fixed 0..=max_id identifier space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdVector {
    pub bits: Vec<u8>,
    pub max_id: u32,
}

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("cluster label {label} out of range for k={k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("mixed vector widths: {a} vs {b}")]
    MixedDimensions { a: usize, b: usize },
    #[error("mixed patches in one lineup: {a:?} vs {b:?}")]
    MixedPatches { a: String, b: String },
    #[error("lineup has {got} members, expected {expected}")]
    WrongTeamSize { got: usize, expected: usize },
    #[error("character id {id} outside trained id space 0..={max_id}")]
    IdOutOfRange { id: u32, max_id: u32 },
    #[error("character table file {path}: {detail}")]
    TableFile { path: std::path::PathBuf, detail: String },
}

/// Standard lineup size.
pub const TEAM_SIZE: usize = 5;

/// One-hot vector for a single ability's cluster label.
pub fn encode_ability(label: usize, k: usize) -> Result<Vec<u32>, EncodingError> {
    if label >= k {
        return Err(EncodingError::LabelOutOfRange { label, k });
    }
    let mut v = vec![0; k];
    v[label] = 1;
    Ok(v)
}

/// Counts a character's ability labels per cluster. An empty label list is
/// legal and yields the zero vector.
pub fn encode_character(
    character: &str,
    patch: &str,
    labels: &[usize],
    k: usize,
) -> Result<CharacterVector, EncodingError> {
    let mut counts = vec![0u32; k];
    for &label in labels {
        if label >= k {
            return Err(EncodingError::LabelOutOfRange { label, k });
        }
        counts[label] += 1;
    }
    Ok(CharacterVector { character: character.to_string(), patch: patch.to_string(), counts })
}

/// Sums five member vectors into a team vector. Order-invariant.
pub fn encode_lineup(
    members: &[CharacterVector],
    team: Team,
) -> Result<LineupVector, EncodingError> {
    encode_lineup_sized(members, team, TEAM_SIZE)
}

/// As [`encode_lineup`] with a configurable team size for small test setups.
pub fn encode_lineup_sized(
    members: &[CharacterVector],
    team: Team,
    expected: usize,
) -> Result<LineupVector, EncodingError> {
    if members.len() != expected {
        return Err(EncodingError::WrongTeamSize { got: members.len(), expected });
    }
    let first = &members[0];
    let mut counts = vec![0u32; first.k()];
    for member in members {
        if member.k() != first.k() {
            return Err(EncodingError::MixedDimensions { a: first.k(), b: member.k() });
        }
        if member.patch != first.patch {
            return Err(EncodingError::MixedPatches {
                a: first.patch.clone(),
                b: member.patch.clone(),
            });
        }
        for (total, c) in counts.iter_mut().zip(&member.counts) {
            *total += c;
        }
    }
    Ok(LineupVector { team, counts })
}

/// Multi-hot ID encoding over the trained space. Any id beyond `max_id` is an
/// error, never a silent truncation or growth; this is the representation
/// that breaks when a patch introduces a new character.
pub fn encode_character_ids(ids: &[u32], max_id: u32) -> Result<IdVector, EncodingError> {
    let mut bits = vec![0u8; max_id as usize + 1];
    for &id in ids {
        if id > max_id {
            return Err(EncodingError::IdOutOfRange { id, max_id });
        }
        bits[id as usize] = 1;
    }
    Ok(IdVector { bits, max_id })
}

/// Groups per-ability cluster labels by (patch, character) into character
/// vectors, in first-appearance order of the rows.
///
/// `keys` and `labels` must be parallel, as produced by stacking a feature
/// table and assigning it against a cluster model.
pub fn character_vectors(
    keys: &[RowKey],
    labels: &[usize],
    k: usize,
) -> Result<Vec<CharacterVector>, EncodingError> {
    if keys.len() != labels.len() {
        return Err(EncodingError::MixedDimensions { a: keys.len(), b: labels.len() });
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut grouped: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (key, &label) in keys.iter().zip(labels) {
        let group = (key.patch.clone(), key.character.clone());
        if !grouped.contains_key(&group) {
            order.push(group.clone());
        }
        grouped.entry(group).or_default().push(label);
    }
    order
        .into_iter()
        .map(|group| {
            let labels = &grouped[&group];
            encode_character(&group.1, &group.0, labels, k)
        })
        .collect()
}

/// Convenience for a single already-standardized table: assigns nothing, just
/// groups the provided labels (parallel to `table.rows`).
pub fn character_vectors_for_table(
    table: &StandardizedAbilityTable,
    labels: &[usize],
    k: usize,
) -> Result<Vec<CharacterVector>, EncodingError> {
    let keys: Vec<RowKey> = table
        .rows
        .iter()
        .map(|row| RowKey {
            patch: table.patch.clone(),
            character: row.character.clone(),
            ability: row.ability.clone(),
        })
        .collect();
    character_vectors(&keys, labels, k)
}

/// Writes the `patch,character,c0..c{K-1}` table.
pub fn write_character_csv(
    vectors: &[CharacterVector],
    k: usize,
    path: &Path,
) -> Result<(), EncodingError> {
    let err = |detail: String| EncodingError::TableFile { path: path.to_path_buf(), detail };
    let mut writer = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut header = vec!["patch".to_string(), "character".to_string()];
    header.extend((0..k).map(|i| format!("c{i}")));
    writer.write_record(&header).map_err(|e| err(e.to_string()))?;
    for v in vectors {
        if v.k() != k {
            return Err(EncodingError::MixedDimensions { a: k, b: v.k() });
        }
        let mut record = vec![v.patch.clone(), v.character.clone()];
        record.extend(v.counts.iter().map(u32::to_string));
        writer.write_record(&record).map_err(|e| err(e.to_string()))?;
    }
    writer.flush().map_err(|e| err(e.to_string()))
}

/// Reads a table written by [`write_character_csv`]; returns the vectors and K.
pub fn load_character_csv(path: &Path) -> Result<(Vec<CharacterVector>, usize), EncodingError> {
    let err = |detail: String| EncodingError::TableFile { path: path.to_path_buf(), detail };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields.len() < 2 || fields[0] != "patch" || fields[1] != "character" {
        return Err(err(format!("header must start with patch,character; got {fields:?}")));
    }
    let k = fields.len() - 2;
    for (i, name) in fields[2..].iter().enumerate() {
        if *name != format!("c{i}") {
            return Err(err(format!("count column {i} named {name:?}, expected c{i}")));
        }
    }
    let mut vectors = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(format!("row {}: {e}", i + 2)))?;
        if record.len() != 2 + k {
            return Err(err(format!("row {}: expected {} fields, got {}", i + 2, 2 + k, record.len())));
        }
        let counts: Result<Vec<u32>, _> = record.iter().skip(2).map(str::parse::<u32>).collect();
        vectors.push(CharacterVector {
            patch: record[0].to_string(),
            character: record[1].to_string(),
            counts: counts.map_err(|e| err(format!("row {}: {e}", i + 2)))?,
        });
    }
    Ok((vectors, k))
}
