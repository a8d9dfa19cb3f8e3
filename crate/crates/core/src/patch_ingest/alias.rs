//! Property alias rules: renames plus sign flips that unify properties the
//! game expresses in two directions (a 30 "slow" equals a -30 "bonus").

use std::collections::BTreeMap;
use std::path::Path;

use super::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct AliasRule {
    pub source: String,
    pub canonical: String,
    /// +1.0 or -1.0, applied to the numeric value when renaming.
    pub sign: f64,
}

/// Source-to-canonical property map, closed under itself: no canonical name
/// is also a source, so applying the map twice changes nothing.
#[derive(Debug, Clone, Default)]
pub struct AliasMap {
    by_source: BTreeMap<String, (String, f64)>,
}

impl AliasMap {
    pub fn empty() -> Self {
        AliasMap::default()
    }

    pub fn new(rules: Vec<AliasRule>) -> Result<Self, IngestError> {
        let invalid = |detail: String| IngestError::InvalidAliasMap { detail };
        let mut by_source = BTreeMap::new();
        for rule in &rules {
            if rule.sign != 1.0 && rule.sign != -1.0 {
                return Err(invalid(format!(
                    "rule {:?}: sign must be 1 or -1, got {}",
                    rule.source, rule.sign
                )));
            }
            if rule.source == rule.canonical {
                return Err(invalid(format!("rule {:?} maps to itself", rule.source)));
            }
            let prev = by_source
                .insert(rule.source.clone(), (rule.canonical.clone(), rule.sign));
            if prev.is_some() {
                return Err(invalid(format!("duplicate source {:?}", rule.source)));
            }
        }
        for rule in &rules {
            if by_source.contains_key(&rule.canonical) {
                return Err(invalid(format!(
                    "canonical {:?} is also a source; map must be closed",
                    rule.canonical
                )));
            }
        }
        Ok(AliasMap { by_source })
    }

    /// Loads a `source,canonical,sign` CSV.
    pub fn from_csv_path(path: &Path) -> Result<Self, IngestError> {
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
        let headers = reader
            .headers()
            .map_err(|e| malformed(e.to_string()))?
            .clone();
        let expected = ["source", "canonical", "sign"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(IngestError::SchemaMismatch {
                detail: format!("alias map header must be source,canonical,sign, got {headers:?}"),
            });
        }
        let mut rules = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| malformed(format!("row {}: {e}", i + 2)))?;
            let sign: f64 = record[2]
                .trim()
                .parse()
                .map_err(|_| malformed(format!("row {}: sign {:?} not numeric", i + 2, &record[2])))?;
            rules.push(AliasRule {
                source: record[0].to_string(),
                canonical: record[1].to_string(),
                sign,
            });
        }
        AliasMap::new(rules)
    }

    /// Maps a property name to its canonical form and value sign.
    /// Unmapped names are already canonical.
    pub fn canonicalize<'a>(&'a self, name: &'a str) -> (&'a str, f64) {
        match self.by_source.get(name) {
            Some((canonical, sign)) => (canonical.as_str(), *sign),
            None => (name, 1.0),
        }
    }

    pub fn len(&self) -> usize {
        self.by_source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_source.is_empty()
    }
}
