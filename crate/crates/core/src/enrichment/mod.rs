//! Derived social features: account age, popularity, gender and bot score,
//! assembled together with the vision and text outputs into one record.

mod botscore;
mod gender;

pub use botscore::{fetch_bot_score, BotScoreClient, HttpScoreTransport, ScoreTransport, TransportError, API_KEY_ENV, MAX_SCORE};
pub use gender::{lookup_gender, Gender, GenderDictionary};

#[cfg(test)]
pub(crate) use botscore::testing::StubTransport;

use chrono::{DateTime, NaiveDate, Utc};
use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TweetRecord;
use crate::vision::Detection;

#[derive(Debug, Error)]
pub enum EnrichmentError {
    #[error("account created {created} is after reference date {reference}")]
    FutureAccount { created: NaiveDate, reference: NaiveDate },
    #[error("dictionary line {line}: {reason}")]
    BadDictionary { line: usize, reason: String },
    #[error("bot-score cache line {line}: {reason}")]
    BadCache { line: usize, reason: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anchor date used when no other reference date is configured.
pub fn default_reference_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 9, 30).expect("valid date")
}

/// Calendar-day difference (UTC) between account creation and the reference date.
pub fn compute_account_age(account_created_at: DateTime<Utc>, reference_date: NaiveDate) -> Result<u64, EnrichmentError> {
    let created = account_created_at.date_naive();
    let days = (reference_date - created).num_days();
    if days < 0 {
        return Err(EnrichmentError::FutureAccount { created, reference: reference_date });
    }
    Ok(days as u64)
}

/// An account is popular when it has strictly more followers than friends.
pub fn compute_popularity(followers_count: u64, friends_count: u64) -> bool {
    followers_count > friends_count
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VisionOutputs {
    pub ocr_text: String,
    pub detected_objects: Vec<Detection>,
    pub object_text_similarity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TextOutputs {
    pub translated_text: String,
    pub cleaned_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub tweet_id: String,
    pub account_age_days: u64,
    pub popular: bool,
    pub gender: Gender,
    pub bot_score: Option<f64>,
    pub ocr_text: String,
    pub detected_objects: Vec<Detection>,
    pub object_text_similarity: Option<f64>,
    pub translated_text: String,
    pub cleaned_text: String,
}

/// Assembles every derived feature for one record. Only `FutureAccount`
/// propagates; other sub-features degrade to absent or empty.
pub fn enrich(
    record: &TweetRecord,
    dict: &GenderDictionary,
    bot: Option<&BotScoreClient>,
    vision: VisionOutputs,
    text: TextOutputs,
    reference_date: NaiveDate,
) -> Result<EnrichmentRecord, EnrichmentError> {
    let account_age_days = compute_account_age(record.user.account_created_at, reference_date)?;
    let bot_score = bot.and_then(|c| fetch_bot_score(&record.user.handle, c));

    let detected_objects: Vec<Detection> = vision.detected_objects.into_iter().filter(|d| (0.0..=1.0).contains(&d.confidence)).collect();
    let object_text_similarity = match vision.object_text_similarity {
        Some(s) if (-1.0..=1.0).contains(&s) => Some(s),
        Some(s) => {
            warn!("{}: object-text similarity {s} outside [-1, 1], dropped", record.tweet_id);
            None
        }
        None => None,
    };

    Ok(EnrichmentRecord {
        tweet_id: record.tweet_id.clone(),
        account_age_days,
        popular: compute_popularity(record.user.followers_count, record.user.friends_count),
        gender: lookup_gender(&record.user.display_name, dict),
        bot_score,
        ocr_text: vision.ocr_text,
        detected_objects,
        object_text_similarity,
        translated_text: text.translated_text,
        cleaned_text: text.cleaned_text,
    })
}
