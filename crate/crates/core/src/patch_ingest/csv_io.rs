//! Feature table CSV persistence.
//!
//! Header is `patch,character,ability,<canonical columns...>`. Values use the
//! shortest decimal form that round-trips, so write-then-read is identity.

use std::path::Path;

use super::{FeatureRow, IngestError, StandardizedAbilityTable};

const FIXED_FIELDS: [&str; 3] = ["patch", "character", "ability"];

pub fn persist_feature_table(
    table: &StandardizedAbilityTable,
    path: &Path,
) -> Result<(), IngestError> {
    let unreadable = |e: std::io::Error| IngestError::FileUnreadable {
        path: path.to_path_buf(),
        source: e,
    };
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| unreadable(std::io::Error::other(e.to_string())))?;
    let header: Vec<&str> = FIXED_FIELDS
        .iter()
        .copied()
        .chain(table.columns.iter().map(String::as_str))
        .collect();
    writer.write_record(&header).map_err(|e| unreadable(e.into()))?;
    for row in &table.rows {
        let mut record = vec![table.patch.clone(), row.character.clone(), row.ability.clone()];
        record.extend(row.values.iter().map(f64::to_string));
        writer.write_record(&record).map_err(|e| unreadable(e.into()))?;
    }
    writer.flush().map_err(unreadable)
}

/// Loads a feature table, checking structural invariants: the three fixed
/// fields, lexicographic unique columns, uniform row width, a single patch.
pub fn load_feature_table(path: &Path) -> Result<StandardizedAbilityTable, IngestError> {
    load_impl(path, None)
}

/// As [`load_feature_table`], additionally requiring the canonical columns to
/// equal `expected` exactly.
pub fn load_feature_table_expecting(
    path: &Path,
    expected: &[String],
) -> Result<StandardizedAbilityTable, IngestError> {
    load_impl(path, Some(expected))
}

fn load_impl(
    path: &Path,
    expected: Option<&[String]>,
) -> Result<StandardizedAbilityTable, IngestError> {
    let mismatch = |detail: String| IngestError::SchemaMismatch { detail };
    let malformed = |detail: String| IngestError::MalformedDocument {
        path: path.to_path_buf(),
        detail,
    };

    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => IngestError::FileUnreadable {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => malformed(e.to_string()),
    })?;

    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields.len() < FIXED_FIELDS.len() || fields[..3] != FIXED_FIELDS {
        return Err(mismatch(format!(
            "header must start with patch,character,ability; got {fields:?}"
        )));
    }
    let columns: Vec<String> = fields[3..].iter().map(|s| s.to_string()).collect();
    for pair in columns.windows(2) {
        if pair[0] >= pair[1] {
            return Err(mismatch(format!(
                "columns must be unique and lexicographic; {:?} precedes {:?}",
                pair[0], pair[1]
            )));
        }
    }
    if let Some(expected) = expected {
        if columns != expected {
            let unknown: Vec<&String> =
                columns.iter().filter(|c| !expected.contains(c)).collect();
            let missing: Vec<&String> =
                expected.iter().filter(|c| !columns.contains(c)).collect();
            return Err(mismatch(format!(
                "columns disagree with expected set (unknown: {unknown:?}, missing: {missing:?})"
            )));
        }
    }

    let mut patch: Option<String> = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| malformed(format!("row {line}: {e}")))?;
        if record.len() != 3 + columns.len() {
            return Err(malformed(format!(
                "row {line}: expected {} fields, got {}",
                3 + columns.len(),
                record.len()
            )));
        }
        match &patch {
            None => patch = Some(record[0].to_string()),
            Some(p) if *p != record[0] => {
                return Err(malformed(format!(
                    "row {line}: patch {:?} differs from {p:?}; one table holds one patch",
                    &record[0]
                )));
            }
            Some(_) => {}
        }
        let values: Result<Vec<f64>, _> = record
            .iter()
            .skip(3)
            .enumerate()
            .map(|(j, v)| {
                v.parse::<f64>()
                    .map_err(|_| malformed(format!("row {line}, column {:?}: {v:?} not numeric", columns[j])))
            })
            .collect();
        rows.push(FeatureRow {
            character: record[1].to_string(),
            ability: record[2].to_string(),
            values: values?,
        });
    }

    let patch = patch.ok_or_else(|| malformed("no data rows".to_string()))?;
    Ok(StandardizedAbilityTable { patch, columns, rows })
}
