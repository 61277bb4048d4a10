//! Social feature vector layout and min-max normalization.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::corpus::TweetRecord;
use crate::enrichment::{EnrichmentRecord, Gender};

/// Version of the standard social layout; bump when fields change.
pub const SOCIAL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Numeric,
    Boolean,
    /// Value slot followed by a 0/1 presence slot; absent values are 0 with presence 0.
    OptionalNumeric,
    OneHot {
        width: usize,
    },
}

impl FieldKind {
    pub fn width(self) -> usize {
        match self {
            FieldKind::Numeric | FieldKind::Boolean => 1,
            FieldKind::OptionalNumeric => 2,
            FieldKind::OneHot { width } => width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialField {
    pub name: String,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialVectorSchema {
    pub version: u32,
    pub fields: Vec<SocialField>,
}

const STANDARD_FIELDS: &[(&str, FieldKind)] = &[
    ("retweet_count", FieldKind::Numeric),
    ("favourite_count", FieldKind::Numeric),
    ("retweeted", FieldKind::Boolean),
    ("followers_count", FieldKind::Numeric),
    ("favorites_count", FieldKind::Numeric),
    ("friends_count", FieldKind::Numeric),
    ("verified", FieldKind::Boolean),
    ("statuses_count", FieldKind::Numeric),
    ("gender", FieldKind::OneHot { width: 3 }),
    ("bot_score", FieldKind::OptionalNumeric),
    ("popular", FieldKind::Boolean),
    ("account_age_days", FieldKind::Numeric),
    ("object_text_similarity", FieldKind::OptionalNumeric),
];

impl SocialVectorSchema {
    /// The standard 13-field, 17-slot layout.
    pub fn standard() -> Self {
        Self {
            version: SOCIAL_SCHEMA_VERSION,
            fields: STANDARD_FIELDS.iter().map(|(n, k)| SocialField { name: n.to_string(), kind: *k }).collect(),
        }
    }

    pub fn total_dim(&self) -> usize {
        self.fields.iter().map(|f| f.kind.width()).sum()
    }

    /// Slot offset of a named field.
    pub fn offset_of(&self, name: &str) -> Option<usize> {
        let mut off = 0;
        for f in &self.fields {
            if f.name == name {
                return Some(off);
            }
            off += f.kind.width();
        }
        None
    }

    /// Checks that the field set and kinds equal the standard set (order may differ).
    pub fn validate(&self) -> Result<(), FeatureError> {
        let std = Self::standard();
        let want: BTreeSet<_> = std.fields.iter().map(|f| (f.name.as_str(), f.kind.width())).collect();
        let got: BTreeSet<_> = self.fields.iter().map(|f| (f.name.as_str(), f.kind.width())).collect();
        if want != got || self.fields.len() != std.fields.len() {
            return Err(FeatureError::SchemaMismatch("social schema must cover exactly the standard fields".into()));
        }
        for f in &self.fields {
            let k = std.fields.iter().find(|s| s.name == f.name).map(|s| s.kind);
            if k != Some(f.kind) {
                return Err(FeatureError::SchemaMismatch(format!("field {} has kind {:?}", f.name, f.kind)));
            }
        }
        Ok(())
    }
}

fn b(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

/// Serializes one record's social features in schema order.
pub fn build_social_vector(rec: &TweetRecord, enr: &EnrichmentRecord, schema: &SocialVectorSchema) -> Result<Vec<f64>, FeatureError> {
    schema.validate()?;
    if rec.tweet_id != enr.tweet_id {
        return Err(FeatureError::SchemaMismatch(format!("enrichment {} does not belong to record {}", enr.tweet_id, rec.tweet_id)));
    }
    let mut v = Vec::with_capacity(schema.total_dim());
    let optional = |v: &mut Vec<f64>, x: Option<f64>| {
        v.push(x.unwrap_or(0.0));
        v.push(b(x.is_some()));
    };
    for f in &schema.fields {
        match f.name.as_str() {
            "retweet_count" => v.push(rec.retweet_count as f64),
            "favourite_count" => v.push(rec.favourite_count as f64),
            "retweeted" => v.push(b(rec.retweeted)),
            "followers_count" => v.push(rec.user.followers_count as f64),
            "favorites_count" => v.push(rec.user.favorites_count as f64),
            "friends_count" => v.push(rec.user.friends_count as f64),
            "verified" => v.push(b(rec.user.verified)),
            "statuses_count" => v.push(rec.user.statuses_count as f64),
            "gender" => v.extend(Gender::ALL.iter().map(|g| b(*g == enr.gender))),
            "bot_score" => optional(&mut v, enr.bot_score),
            "popular" => v.push(b(enr.popular)),
            "account_age_days" => v.push(enr.account_age_days as f64),
            "object_text_similarity" => optional(&mut v, enr.object_text_similarity),
            other => return Err(FeatureError::SchemaMismatch(format!("unknown field {other}"))),
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotScale {
    /// Left untouched (booleans, one-hot, presence flags).
    Passthrough,
    Range {
        min: f64,
        max: f64,
    },
    /// Degenerate training range; always maps to 0.
    Constant {
        value: f64,
    },
    /// Optional value whose presence flag sits at `presence_slot`; only
    /// present training values define the range.
    Gated {
        presence_slot: usize,
        min: f64,
        max: f64,
        constant: bool,
    },
}

/// Per-slot min-max scaling fitted on training vectors only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub schema_version: u32,
    pub slots: Vec<SlotScale>,
}

pub fn fit_normalizer(train_vectors: &[Vec<f64>], schema: &SocialVectorSchema) -> Result<Normalizer, FeatureError> {
    if train_vectors.is_empty() {
        return Err(FeatureError::EmptyTraining);
    }
    let dim = schema.total_dim();
    if let Some(v) = train_vectors.iter().find(|v| v.len() != dim) {
        return Err(FeatureError::SchemaMismatch(format!("vector of length {} for schema of {dim}", v.len())));
    }
    let column = |slot: usize, gate: Option<usize>| {
        let vals: Vec<f64> = train_vectors.iter().filter(|v| gate.is_none_or(|g| v[g] != 0.0)).map(|v| v[slot]).collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (vals.len(), min, max)
    };

    let mut slots = Vec::with_capacity(dim);
    let mut off = 0;
    for f in &schema.fields {
        match f.kind {
            FieldKind::Numeric => {
                let (_, min, max) = column(off, None);
                slots.push(if min == max { SlotScale::Constant { value: min } } else { SlotScale::Range { min, max } });
            }
            FieldKind::OptionalNumeric => {
                let presence_slot = off + 1;
                let (n, min, max) = column(off, Some(presence_slot));
                let (min, max) = if n == 0 { (0.0, 0.0) } else { (min, max) };
                slots.push(SlotScale::Gated { presence_slot, min, max, constant: min == max });
                slots.push(SlotScale::Passthrough);
            }
            FieldKind::Boolean | FieldKind::OneHot { .. } => {
                slots.extend(std::iter::repeat_n(SlotScale::Passthrough, f.kind.width()));
            }
        }
        off += f.kind.width();
    }
    Ok(Normalizer { schema_version: schema.version, slots })
}

fn scale(x: f64, min: f64, max: f64) -> f64 {
    ((x - min) / (max - min)).clamp(0.0, 1.0)
}

pub fn apply_normalizer(n: &Normalizer, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if v.len() != n.slots.len() {
        return Err(FeatureError::SchemaMismatch(format!("vector of length {} for normalizer of {}", v.len(), n.slots.len())));
    }
    Ok(n.slots
        .iter()
        .zip(v)
        .map(|(s, &x)| match *s {
            SlotScale::Passthrough => x,
            SlotScale::Range { min, max } => scale(x, min, max),
            SlotScale::Constant { .. } => 0.0,
            SlotScale::Gated { presence_slot, min, max, constant } => {
                if v[presence_slot] == 0.0 || constant {
                    0.0
                } else {
                    scale(x, min, max)
                }
            }
        })
        .collect())
}
