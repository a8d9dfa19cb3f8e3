//! Parsing of the three per-patch constants files.
//!
//! The files mirror the OpenDota constants repository layout:
//! `hero_abilities.json` (hero -> ability names), `abilities.json`
//! (ability -> property soup), `heroes.json` (hero -> attributes). Only the
//! documented subset is interpreted; unknown keys are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::{
    HeroAttributeRecord, IngestError, PrimaryAttribute, RawAbilityEntry, RawAbilityTable, RawValue,
};

/// Internal hero names carry this engine prefix; the short form is used as
/// the character name everywhere downstream.
const HERO_NAME_PREFIX: &str = "npc_dota_hero_";

/// Ability-object keys that are display metadata, not game-design properties.
const METADATA_KEYS: &[&str] = &["dname", "img", "lore", "id"];

/// Parses one patch's constants files into the raw ability table plus the
/// hero attribute records.
///
/// Abilities are taken from the hero mapping file, so anything not reachable
/// from a playable hero (neutral creature abilities, items) never enters the
/// table. An ability listed for a hero but missing from the properties file
/// is kept with an empty property map.
pub fn parse_patch_constants(
    hero_abilities_path: &Path,
    abilities_path: &Path,
    heroes_path: &Path,
    patch: &str,
) -> Result<(RawAbilityTable, Vec<HeroAttributeRecord>), IngestError> {
    let hero_abilities = read_json(hero_abilities_path)?;
    let abilities = read_json(abilities_path)?;
    let heroes_doc = read_json(heroes_path)?;

    let heroes = parse_heroes(&heroes_doc, heroes_path)?;
    let by_name: BTreeMap<&str, &HeroAttributeRecord> =
        heroes.iter().map(|h| (h.character.as_str(), h)).collect();

    let mapping = hero_abilities
        .as_object()
        .ok_or_else(|| malformed(hero_abilities_path, "top level is not an object"))?;
    let ability_objects = abilities
        .as_object()
        .ok_or_else(|| malformed(abilities_path, "top level is not an object"))?;

    let mut entries = Vec::new();
    for (hero_key, body) in mapping {
        let character = short_hero_name(hero_key).to_string();
        let names = body
            .get("abilities")
            .and_then(Value::as_array)
            .ok_or_else(|| {
                malformed(hero_abilities_path, &format!("{hero_key}: no abilities array"))
            })?;
        if !by_name.contains_key(character.as_str()) {
            return Err(IngestError::UnknownHeroReference {
                character,
                ability: names
                    .first()
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string(),
            });
        }
        for name in names {
            let ability = name
                .as_str()
                .ok_or_else(|| {
                    malformed(hero_abilities_path, &format!("{hero_key}: non-string ability"))
                })?
                .to_string();
            let properties = match ability_objects.get(&ability) {
                Some(obj) => parse_ability_properties(obj),
                None => BTreeMap::new(),
            };
            entries.push(RawAbilityEntry { character: character.clone(), ability, properties });
        }
    }

    Ok((RawAbilityTable { patch: patch.to_string(), entries }, heroes))
}

fn read_json(path: &Path) -> Result<Value, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| malformed(path, &e.to_string()))
}

fn malformed(path: &Path, detail: &str) -> IngestError {
    IngestError::MalformedDocument { path: path.to_path_buf(), detail: detail.to_string() }
}

fn short_hero_name(key: &str) -> &str {
    key.strip_prefix(HERO_NAME_PREFIX).unwrap_or(key)
}

fn parse_heroes(doc: &Value, path: &Path) -> Result<Vec<HeroAttributeRecord>, IngestError> {
    let map = doc
        .as_object()
        .ok_or_else(|| malformed(path, "top level is not an object"))?;
    let mut heroes = Vec::new();
    for (key, body) in map {
        let obj = body
            .as_object()
            .ok_or_else(|| malformed(path, &format!("hero {key}: not an object")))?;
        let name = obj
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(path, &format!("hero {key}: missing name")))?;
        let hero_id = obj
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| malformed(path, &format!("hero {key}: missing id")))?
            as u32;
        let attr = obj
            .get("primary_attr")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(path, &format!("hero {key}: missing primary_attr")))?;
        let primary_attribute = parse_primary_attr(attr)
            .ok_or_else(|| malformed(path, &format!("hero {key}: unknown primary_attr {attr:?}")))?;
        let mut stats = BTreeMap::new();
        for (stat, value) in obj {
            if stat == "id" {
                continue;
            }
            if let Some(v) = value.as_f64() {
                stats.insert(stat.clone(), v);
            }
        }
        heroes.push(HeroAttributeRecord {
            character: short_hero_name(name).to_string(),
            hero_id,
            primary_attribute,
            stats,
        });
    }
    Ok(heroes)
}

fn parse_primary_attr(s: &str) -> Option<PrimaryAttribute> {
    match s.to_ascii_lowercase().as_str() {
        "str" | "strength" => Some(PrimaryAttribute::Strength),
        "agi" | "agility" => Some(PrimaryAttribute::Agility),
        "int" | "intelligence" => Some(PrimaryAttribute::Intelligence),
        "all" | "universal" => Some(PrimaryAttribute::Universal),
        _ => None,
    }
}

/// Extracts raw property values from one ability object.
///
/// Top-level scalars and the `attrib` key/value list both contribute; display
/// metadata is skipped. Values are kept as found: numbers stay numbers,
/// slash- or space-separated numeric strings and numeric arrays become
/// per-level lists, anything else textual stays text. Structures that cannot
/// carry a magnitude (nested objects, mixed arrays, null) are dropped.
fn parse_ability_properties(obj: &Value) -> BTreeMap<String, RawValue> {
    let mut properties = BTreeMap::new();
    let Some(map) = obj.as_object() else {
        return properties;
    };
    for (key, value) in map {
        if METADATA_KEYS.contains(&key.as_str()) || key == "attrib" {
            continue;
        }
        if let Some(raw) = raw_value(value) {
            properties.insert(key.clone(), raw);
        }
    }
    if let Some(attribs) = map.get("attrib").and_then(Value::as_array) {
        for item in attribs {
            let (Some(key), Some(value)) = (
                item.get("key").and_then(Value::as_str),
                item.get("value"),
            ) else {
                continue;
            };
            if let Some(raw) = raw_value(value) {
                // A top-level property of the same name wins over attrib.
                properties.entry(key.to_string()).or_insert(raw);
            }
        }
    }
    properties
}

fn raw_value(value: &Value) -> Option<RawValue> {
    match value {
        Value::Number(n) => n.as_f64().map(RawValue::Number),
        Value::Bool(b) => Some(RawValue::Number(if *b { 1.0 } else { 0.0 })),
        Value::String(s) => Some(parse_string_value(s)),
        Value::Array(items) => {
            let levels: Option<Vec<f64>> = items.iter().map(numeric_item).collect();
            match levels {
                Some(v) if !v.is_empty() => Some(RawValue::Levels(v)),
                _ => None,
            }
        }
        Value::Object(_) | Value::Null => None,
    }
}

fn numeric_item(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_number(s),
        _ => None,
    }
}

/// Strings may hold a plain number ("40", "1.75", "15%") or a per-level
/// progression separated by slashes or spaces ("30 / 40 / 50", "30 40 50").
fn parse_string_value(s: &str) -> RawValue {
    let tokens: Vec<&str> = if s.contains('/') {
        s.split('/').map(str::trim).collect()
    } else {
        s.split_whitespace().collect()
    };
    let numbers: Option<Vec<f64>> = tokens.iter().map(|t| parse_number(t)).collect();
    match numbers {
        Some(values) if values.len() > 1 => RawValue::Levels(values),
        Some(values) if values.len() == 1 => RawValue::Number(values[0]),
        _ => RawValue::Text(s.to_string()),
    }
}

fn parse_number(token: &str) -> Option<f64> {
    let token = token.trim().trim_end_matches('%');
    if token.is_empty() {
        return None;
    }
    token.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::NamedTempFile;

    fn write_json(value: serde_json::Value) -> NamedTempFile {
        let mut f = NamedTempFile::new().unwrap();
        write!(f, "{value}").unwrap();
        f
    }

    fn tiny_fixture() -> (NamedTempFile, NamedTempFile, NamedTempFile) {
        let hero_abilities = write_json(serde_json::json!({
            "npc_dota_hero_axe": {
                "abilities": ["axe_berserkers_call", "axe_culling_blade"],
                "talents": [{"name": "special_bonus_unique_axe", "level": 1}]
            }
        }));
        let abilities = write_json(serde_json::json!({
            "axe_berserkers_call": {
                "dname": "Berserker's Call",
                "behavior": "No Target",
                "cd": "16 / 14 / 12 / 10",
                "attrib": [
                    {"key": "radius", "value": "315"},
                    {"key": "bonus_armor", "value": [12, 13, 14, 15]}
                ]
            },
            "axe_culling_blade": {
                "cd": [75, 65, 55],
                "mc": 60,
                "attrib": [{"key": "kill_threshold", "value": "250 325 400"}]
            },
            "black_dragon_fireball": {
                "dname": "Fireball",
                "attrib": [{"key": "damage", "value": "85"}]
            }
        }));
        let heroes = write_json(serde_json::json!({
            "2": {
                "id": 2,
                "name": "npc_dota_hero_axe",
                "localized_name": "Axe",
                "primary_attr": "str",
                "attack_type": "Melee",
                "roles": ["Initiator", "Durable"],
                "base_str": 25,
                "str_gain": 3.4,
                "move_speed": 310
            }
        }));
        (hero_abilities, abilities, heroes)
    }

    #[test]
    fn parses_playable_abilities_only() {
        let (ha, ab, he) = tiny_fixture();
        let (table, heroes) =
            parse_patch_constants(ha.path(), ab.path(), he.path(), "7.31").unwrap();
        assert_eq!(table.patch, "7.31");
        let names: Vec<&str> = table.entries.iter().map(|e| e.ability.as_str()).collect();
        assert_eq!(names, ["axe_berserkers_call", "axe_culling_blade"]);
        assert!(!names.contains(&"black_dragon_fireball"));
        assert_eq!(heroes.len(), 1);
        assert_eq!(heroes[0].character, "axe");
        assert_eq!(heroes[0].hero_id, 2);
        assert_eq!(heroes[0].primary_attribute, PrimaryAttribute::Strength);
        assert_eq!(heroes[0].stats["str_gain"], 3.4);
        assert!(!heroes[0].stats.contains_key("id"));
    }

    #[test]
    fn raw_values_preserve_level_lists() {
        let (ha, ab, he) = tiny_fixture();
        let (table, _) = parse_patch_constants(ha.path(), ab.path(), he.path(), "7.31").unwrap();
        let call = &table.entries[0].properties;
        assert_eq!(call["cd"], RawValue::Levels(vec![16.0, 14.0, 12.0, 10.0]));
        assert_eq!(call["radius"], RawValue::Number(315.0));
        assert_eq!(call["bonus_armor"], RawValue::Levels(vec![12.0, 13.0, 14.0, 15.0]));
        assert_eq!(call["behavior"], RawValue::Text("No Target".into()));
        assert!(!call.contains_key("dname"));
        let blade = &table.entries[1].properties;
        assert_eq!(blade["kill_threshold"], RawValue::Levels(vec![250.0, 325.0, 400.0]));
        assert_eq!(blade["mc"], RawValue::Number(60.0));
    }

    #[test]
    fn hero_missing_from_heroes_file_is_an_error() {
        let (ha, ab, _) = tiny_fixture();
        let empty_heroes = write_json(serde_json::json!({}));
        let err = parse_patch_constants(ha.path(), ab.path(), empty_heroes.path(), "7.31")
            .unwrap_err();
        match err {
            IngestError::UnknownHeroReference { character, ability } => {
                assert_eq!(character, "axe");
                assert_eq!(ability, "axe_berserkers_call");
            }
            other => panic!("expected UnknownHeroReference, got {other}"),
        }
    }

    #[test]
    fn unreadable_and_malformed_files_are_distinguished() {
        let (ha, ab, he) = tiny_fixture();
        let missing = Path::new("/nonexistent/heroes.json");
        assert!(matches!(
            parse_patch_constants(ha.path(), ab.path(), missing, "7.31").unwrap_err(),
            IngestError::FileUnreadable { .. }
        ));
        let mut broken = NamedTempFile::new().unwrap();
        write!(broken, "{{ not json").unwrap();
        assert!(matches!(
            parse_patch_constants(ha.path(), broken.path(), he.path(), "7.31").unwrap_err(),
            IngestError::MalformedDocument { .. }
        ));
    }

    #[test]
    fn universal_attribute_is_accepted_in_any_patch() {
        let heroes = write_json(serde_json::json!({
            "136": {"id": 136, "name": "npc_dota_hero_marci", "primary_attr": "all"}
        }));
        let ha = write_json(serde_json::json!({
            "npc_dota_hero_marci": {"abilities": []}
        }));
        let ab = write_json(serde_json::json!({}));
        let (_, parsed) = parse_patch_constants(ha.path(), ab.path(), heroes.path(), "7.30")
            .unwrap();
        assert_eq!(parsed[0].primary_attribute, PrimaryAttribute::Universal);
    }

    #[test]
    fn percent_and_space_separated_strings_parse_numerically() {
        assert_eq!(parse_string_value("15%"), RawValue::Number(15.0));
        assert_eq!(parse_string_value("2% / 3% / 4%"), RawValue::Levels(vec![2.0, 3.0, 4.0]));
        assert_eq!(parse_string_value("30 40 50"), RawValue::Levels(vec![30.0, 40.0, 50.0]));
        assert_eq!(parse_string_value("Magical"), RawValue::Text("Magical".into()));
    }
}
