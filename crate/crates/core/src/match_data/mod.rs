//! Match records: acquisition, validation, persistence, and splitting.

mod client;
mod synthetic;

pub use client::{fetch_matches, FetchConfig};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticDataset};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// One competitive match. Slots 0-4 are Radiant, 5-9 Dire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub match_id: u64,
    pub patch: String,
    pub duration: u32,
    pub kills_radiant: u32,
    pub kills_dire: u32,
    pub heroes: [u32; 10],
    pub radiant_win: bool,
}

impl MatchRecord {
    pub fn radiant_heroes(&self) -> &[u32] {
        &self.heroes[..5]
    }

    pub fn dire_heroes(&self) -> &[u32] {
        &self.heroes[5..]
    }

    /// First violated invariant, if any: positive duration, ten filled,
    /// pairwise-distinct hero slots.
    pub fn invalid_reason(&self) -> Option<String> {
        if self.duration == 0 {
            return Some("duration is 0".into());
        }
        if self.patch.is_empty() {
            return Some("patch label is empty".into());
        }
        for (i, &hero) in self.heroes.iter().enumerate() {
            if hero == 0 {
                return Some(format!("hero slot {i} unfilled"));
            }
            if self.heroes[..i].contains(&hero) {
                return Some(format!("hero {hero} appears twice"));
            }
        }
        None
    }
}

/// The five mutually disjoint datasets used downstream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<MatchRecord>,
    pub validation: Vec<MatchRecord>,
    pub test: Vec<MatchRecord>,
    pub holdout_732: Vec<MatchRecord>,
    pub holdout_733: Vec<MatchRecord>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> [usize; 5] {
        [
            self.train.len(),
            self.validation.len(),
            self.test.len(),
            self.holdout_732.len(),
            self.holdout_733.len(),
        ]
    }

    /// Training requires all three non-holdout lists to be populated.
    pub fn require_training_data(&self) -> Result<(), MatchDataError> {
        if self.train.is_empty() || self.validation.is_empty() || self.test.is_empty() {
            return Err(MatchDataError::EmptyDataset);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MatchDataError {
    #[error("network: {detail}")]
    Network { detail: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {detail}")]
    MalformedResponse { detail: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid config: {detail}")]
    InvalidConfig { detail: String },
    #[error("match file {path}: {detail}")]
    File { path: PathBuf, detail: String },
}

/// Drops records that violate [`MatchRecord`] invariants, plus duplicate
/// match_ids (first occurrence wins). Total: never fails, only shrinks.
pub fn filter_valid(records: Vec<MatchRecord>) -> Vec<MatchRecord> {
    let mut seen = std::collections::HashSet::new();
    let mut kept = Vec::with_capacity(records.len());
    for record in records {
        if let Some(reason) = record.invalid_reason() {
            log::warn!("dropping match {}: {reason}", record.match_id);
            continue;
        }
        if !seen.insert(record.match_id) {
            log::warn!("dropping match {}: duplicate match_id", record.match_id);
            continue;
        }
        kept.push(record);
    }
    kept
}

/// Routes 7.32/7.33 matches (including letter sub-patches) to their holdouts,
/// then splits the rest 64/16/20 after a seed-determined shuffle.
///
/// Membership depends only on the record set and seed, not on input order:
/// records are sorted by match_id before shuffling.
pub fn split_dataset(records: &[MatchRecord], seed: u64) -> Result<DatasetSplit, MatchDataError> {
    if records.is_empty() {
        return Err(MatchDataError::EmptyDataset);
    }
    let mut main: Vec<MatchRecord> = Vec::new();
    let mut holdout_732: Vec<MatchRecord> = Vec::new();
    let mut holdout_733: Vec<MatchRecord> = Vec::new();
    for record in records {
        if record.patch.starts_with("7.32") {
            holdout_732.push(record.clone());
        } else if record.patch.starts_with("7.33") {
            holdout_733.push(record.clone());
        } else {
            main.push(record.clone());
        }
    }
    holdout_732.sort_by_key(|r| r.match_id);
    holdout_733.sort_by_key(|r| r.match_id);
    main.sort_by_key(|r| r.match_id);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    main.shuffle(&mut rng);

    let n = main.len();
    let n_train = (0.64 * n as f64).round() as usize;
    let n_val = ((0.16 * n as f64).round() as usize).min(n - n_train);
    let test = main.split_off(n_train + n_val);
    let validation = main.split_off(n_train);

    Ok(DatasetSplit { train: main, validation, test, holdout_732, holdout_733 })
}

const CSV_HEADER: [&str; 16] = [
    "MatchID", "Patch", "Duration", "KillsR", "KillsD", "Hero0", "Hero1", "Hero2", "Hero3",
    "Hero4", "Hero5", "Hero6", "Hero7", "Hero8", "Hero9", "RadiantWin",
];

pub fn write_match_csv(records: &[MatchRecord], path: &Path) -> Result<(), MatchDataError> {
    let err = |detail: String| MatchDataError::File { path: path.to_path_buf(), detail };
    let mut writer = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    writer.write_record(CSV_HEADER).map_err(|e| err(e.to_string()))?;
    for r in records {
        let mut record = vec![
            r.match_id.to_string(),
            r.patch.clone(),
            r.duration.to_string(),
            r.kills_radiant.to_string(),
            r.kills_dire.to_string(),
        ];
        record.extend(r.heroes.iter().map(u32::to_string));
        record.push(r.radiant_win.to_string());
        writer.write_record(&record).map_err(|e| err(e.to_string()))?;
    }
    writer.flush().map_err(|e| err(e.to_string()))
}

pub fn load_match_csv(path: &Path) -> Result<Vec<MatchRecord>, MatchDataError> {
    let err = |detail: String| MatchDataError::File { path: path.to_path_buf(), detail };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(err(format!("header must be {}, got {headers:?}", CSV_HEADER.join(","))));
    }
    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| err(format!("row {line}: {e}")))?;
        let parse_u32 = |field: usize| -> Result<u32, MatchDataError> {
            record[field]
                .parse()
                .map_err(|_| err(format!("row {line}: {:?} not an integer", &record[field])))
        };
        let mut heroes = [0u32; 10];
        for (slot, hero) in heroes.iter_mut().enumerate() {
            *hero = parse_u32(5 + slot)?;
        }
        let radiant_win = match &record[15] {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(err(format!("row {line}: RadiantWin {other:?} not boolean"))),
        };
        records.push(MatchRecord {
            match_id: record[0]
                .parse()
                .map_err(|_| err(format!("row {line}: MatchID {:?} not an integer", &record[0])))?,
            patch: record[1].to_string(),
            duration: parse_u32(2)?,
            kills_radiant: parse_u32(3)?,
            kills_dire: parse_u32(4)?,
            heroes,
            radiant_win,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn record(match_id: u64, patch: &str) -> MatchRecord {
        MatchRecord {
            match_id,
            patch: patch.into(),
            duration: 2400,
            kills_radiant: 30,
            kills_dire: 22,
            heroes: [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            radiant_win: true,
        }
    }

    #[test]
    fn filter_drops_invariant_violations() {
        let mut zero_duration = record(1, "7.30");
        zero_duration.duration = 0;
        let mut duplicate_hero = record(2, "7.30");
        duplicate_hero.heroes[7] = duplicate_hero.heroes[2];
        let mut unfilled = record(3, "7.30");
        unfilled.heroes[9] = 0;
        let valid = record(4, "7.30");
        let duplicate_id = record(4, "7.30");
        let kept = filter_valid(vec![zero_duration, duplicate_hero, unfilled, valid, duplicate_id]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].match_id, 4);
    }

    #[test]
    fn split_honors_ratios_and_holdouts() {
        let mut records: Vec<MatchRecord> = (0..100).map(|i| record(i, "7.30")).collect();
        records.push(record(1000, "7.32"));
        records.push(record(1001, "7.32b"));
        records.push(record(1002, "7.33"));
        let split = split_dataset(&records, 7).unwrap();
        assert_eq!(split.sizes(), [64, 16, 20, 2, 1]);
        assert!(split.require_training_data().is_ok());
    }

    #[test]
    fn split_is_deterministic_and_order_independent() {
        let records: Vec<MatchRecord> = (0..50).map(|i| record(i, "7.29")).collect();
        let mut reversed = records.clone();
        reversed.reverse();
        let a = split_dataset(&records, 99).unwrap();
        let b = split_dataset(&reversed, 99).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&records, 100).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn splits_are_pairwise_disjoint() {
        let mut records: Vec<MatchRecord> = (0..83).map(|i| record(i, "7.28")).collect();
        records.extend((100..120).map(|i| record(i, "7.32")));
        records.extend((200..210).map(|i| record(i, "7.33")));
        let split = split_dataset(&records, 3).unwrap();
        let mut all_ids: Vec<u64> = Vec::new();
        for list in [
            &split.train,
            &split.validation,
            &split.test,
            &split.holdout_732,
            &split.holdout_733,
        ] {
            all_ids.extend(list.iter().map(|r| r.match_id));
        }
        let unique: std::collections::HashSet<u64> = all_ids.iter().copied().collect();
        assert_eq!(unique.len(), all_ids.len());
        assert_eq!(all_ids.len(), 113);
        assert!(split.holdout_732.iter().all(|r| r.patch.starts_with("7.32")));
    }

    #[test]
    fn all_holdout_input_leaves_training_empty() {
        let records: Vec<MatchRecord> = (0..10).map(|i| record(i, "7.32")).collect();
        let split = split_dataset(&records, 1).unwrap();
        assert_eq!(split.sizes(), [0, 0, 0, 10, 0]);
        assert!(matches!(
            split.require_training_data().unwrap_err(),
            MatchDataError::EmptyDataset
        ));
        assert!(matches!(split_dataset(&[], 1).unwrap_err(), MatchDataError::EmptyDataset));
    }

    #[test]
    fn match_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matches.csv");
        let records = vec![record(10, "7.30"), record(11, "7.32")];
        write_match_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "MatchID,Patch,Duration,KillsR,KillsD,Hero0,Hero1,Hero2,Hero3,Hero4,Hero5,Hero6,Hero7,Hero8,Hero9,RadiantWin\n"
        ));
        assert_eq!(load_match_csv(&path).unwrap(), records);
    }

    #[test]
    fn match_csv_rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matches.csv");
        std::fs::write(&path, "match_id,patch\n1,7.30\n").unwrap();
        assert!(matches!(
            load_match_csv(&path).unwrap_err(),
            MatchDataError::File { .. }
        ));
    }
}
