use chrono::{TimeZone, Utc};

use crate::corpus::{TweetRecord, UserSnapshot};
use crate::enrichment::{EnrichmentRecord, Gender};

pub fn tweet(id: &str, display_name: &str, followers: u64, friends: u64) -> TweetRecord {
    TweetRecord {
        tweet_id: id.to_string(),
        text: "Vaccines contain microchips #covid".into(),
        language: "en".into(),
        created_at: Utc.with_ymd_and_hms(2021, 5, 4, 10, 0, 0).unwrap(),
        hashtags: vec!["covid".into()],
        mentions: vec![],
        media_path: None,
        user: UserSnapshot {
            handle: format!("user_{id}"),
            display_name: display_name.to_string(),
            followers_count: followers,
            friends_count: friends,
            favorites_count: 12,
            statuses_count: 340,
            verified: false,
            account_created_at: Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap(),
        },
        retweet_count: 3,
        favourite_count: 7,
        retweeted: false,
        raw_verdict: "false".into(),
    }
}

pub fn enrichment_for(rec: &TweetRecord) -> EnrichmentRecord {
    EnrichmentRecord {
        tweet_id: rec.tweet_id.clone(),
        account_age_days: 3000,
        popular: rec.user.followers_count > rec.user.friends_count,
        gender: Gender::Undetermined,
        bot_score: None,
        ocr_text: String::new(),
        detected_objects: vec![],
        object_text_similarity: None,
        translated_text: rec.text.clone(),
        cleaned_text: rec.text.to_lowercase(),
    }
}
