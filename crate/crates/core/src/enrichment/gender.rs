use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnrichmentError;

const DEFAULT_NAMES: &str = include_str!("../../data/gender_names.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Undetermined,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Undetermined];

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Undetermined => "undetermined",
        }
    }
}

/// First-name dictionary, keyed by lower-cased name.
#[derive(Debug, Clone, Default)]
pub struct GenderDictionary {
    entries: HashMap<String, Gender>,
}

impl GenderDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, gender: Gender) -> Result<(), EnrichmentError> {
        let key = name_key(name);
        if key.is_empty() || gender == Gender::Undetermined {
            return Err(EnrichmentError::BadDictionary { line: 0, reason: format!("invalid entry {name:?}") });
        }
        self.entries.insert(key, gender);
        Ok(())
    }

    /// Parses `name<TAB>gender` lines (`male`/`female`, or `m`/`f`).
    pub fn from_tsv(src: &str) -> Result<Self, EnrichmentError> {
        let mut dict = Self::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |reason: String| EnrichmentError::BadDictionary { line: i + 1, reason };
            let (name, g) = line.split_once('\t').ok_or_else(|| bad("expected name<TAB>gender".into()))?;
            let gender = match g.trim().to_ascii_lowercase().as_str() {
                "male" | "m" => Gender::Male,
                "female" | "f" => Gender::Female,
                other => return Err(bad(format!("unknown gender {other:?}"))),
            };
            let key = name_key(name);
            if key.is_empty() {
                return Err(bad("empty name".into()));
            }
            dict.entries.insert(key, gender);
        }
        Ok(dict)
    }

    pub fn load(path: &Path) -> Result<Self, EnrichmentError> {
        Self::from_tsv(&fs::read_to_string(path)?)
    }

    pub fn bundled() -> Self {
        Self::from_tsv(DEFAULT_NAMES).expect("bundled name dictionary is valid")
    }

    pub fn get(&self, name: &str) -> Option<Gender> {
        self.entries.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn name_key(token: &str) -> String {
    token.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect()
}

/// Looks up the first token of a display name. Misses, empty names and
/// names made only of symbols (emoji, digits) are `Undetermined`.
pub fn lookup_gender(display_name: &str, dict: &GenderDictionary) -> Gender {
    display_name
        .split_whitespace()
        .next()
        .map(name_key)
        .filter(|k| !k.is_empty())
        .and_then(|k| dict.get(&k))
        .unwrap_or(Gender::Undetermined)
}
