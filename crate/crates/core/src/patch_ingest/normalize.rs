//! Normalization of raw properties into the standardized numeric table.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    AliasMap, FeatureRow, HeroAttributeRecord, IngestError, PrimaryAttribute, RawAbilityTable,
    RawValue, StandardizedAbilityTable,
};

/// Prefix separating appended hero attribute columns from ability columns.
const HERO_COLUMN_PREFIX: &str = "hero_";

/// Collapses raw property values to canonical numeric columns.
///
/// Rules, in order: the alias map renames the property and fixes its sign;
/// per-level lists collapse to their arithmetic mean; text values become a
/// presence flag of 1; absent properties read as 0. When two source
/// properties of one ability land on the same canonical name the values are
/// summed and a warning is logged; additive stacking is the usual game
/// semantics for duplicated effects.
pub fn normalize_properties(raw: &RawAbilityTable, aliases: &AliasMap) -> StandardizedAbilityTable {
    let mut normalized: Vec<(String, String, BTreeMap<String, f64>)> = Vec::new();
    let mut column_set = BTreeSet::new();

    for entry in &raw.entries {
        let mut canonical_values: BTreeMap<String, f64> = BTreeMap::new();
        for (name, value) in &entry.properties {
            let (canonical, sign) = aliases.canonicalize(name);
            let magnitude = sign * scalar_value(value);
            column_set.insert(canonical.to_string());
            if let Some(existing) = canonical_values.get_mut(canonical) {
                log::warn!(
                    "{}/{}: properties conflict on {canonical:?}; summing {existing} and {magnitude}",
                    entry.character,
                    entry.ability
                );
                *existing += magnitude;
            } else {
                canonical_values.insert(canonical.to_string(), magnitude);
            }
        }
        normalized.push((entry.character.clone(), entry.ability.clone(), canonical_values));
    }

    let columns: Vec<String> = column_set.into_iter().collect();
    let rows = normalized
        .into_iter()
        .map(|(character, ability, values)| FeatureRow {
            character,
            ability,
            values: columns
                .iter()
                .map(|c| values.get(c).copied().unwrap_or(0.0))
                .collect(),
        })
        .collect();

    StandardizedAbilityTable { patch: raw.patch.clone(), columns, rows }
}

fn scalar_value(value: &RawValue) -> f64 {
    match value {
        RawValue::Number(n) => *n,
        RawValue::Levels(levels) => levels.iter().sum::<f64>() / levels.len() as f64,
        RawValue::Text(_) => 1.0,
    }
}

/// Appends hero attribute columns (numeric stats plus a four-column one-hot
/// of the primary attribute) to every ability row of each character.
pub fn attach_hero_attributes(
    table: &StandardizedAbilityTable,
    heroes: &[HeroAttributeRecord],
) -> Result<StandardizedAbilityTable, IngestError> {
    let by_name: BTreeMap<&str, &HeroAttributeRecord> =
        heroes.iter().map(|h| (h.character.as_str(), h)).collect();

    let mut attribute_columns = BTreeSet::new();
    for row in &table.rows {
        let hero = by_name.get(row.character.as_str()).ok_or_else(|| {
            IngestError::MissingHeroRecord { character: row.character.clone() }
        })?;
        for stat in hero.stats.keys() {
            attribute_columns.insert(format!("{HERO_COLUMN_PREFIX}{stat}"));
        }
    }
    for attr in [
        PrimaryAttribute::Agility,
        PrimaryAttribute::Intelligence,
        PrimaryAttribute::Strength,
        PrimaryAttribute::Universal,
    ] {
        attribute_columns.insert(one_hot_column(attr));
    }

    let columns: Vec<String> = table
        .columns
        .iter()
        .cloned()
        .chain(attribute_columns.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let rows = table
        .rows
        .iter()
        .map(|row| {
            let hero = by_name[row.character.as_str()];
            let values = columns
                .iter()
                .map(|column| {
                    if let Ok(i) = table.columns.binary_search(column) {
                        row.values[i]
                    } else if *column == one_hot_column(hero.primary_attribute) {
                        1.0
                    } else if let Some(stat) = column.strip_prefix(HERO_COLUMN_PREFIX) {
                        hero.stats.get(stat).copied().unwrap_or(0.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            FeatureRow { character: row.character.clone(), ability: row.ability.clone(), values }
        })
        .collect();

    Ok(StandardizedAbilityTable { patch: table.patch.clone(), columns, rows })
}

fn one_hot_column(attr: PrimaryAttribute) -> String {
    format!("{HERO_COLUMN_PREFIX}primary_{}", attr.as_str())
}
