//! Per-class descriptive statistics of how records spread: engagement means,
//! account-level counts, and retweet/like means grouped by account traits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write;

use thiserror::Error;

use crate::corpus::{BinaryLabel, Dataset, LabeledTweet};
use crate::enrichment::{EnrichmentRecord, Gender};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PropagationError {
    #[error("record {0} has no enrichment")]
    CoverageGap(String),
}

/// Aggregates for one class. Account-level fields count unique handles, using
/// the snapshot on each handle's earliest tweet; means are over tweets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassAggregates {
    pub tweets: usize,
    pub unique_accounts: usize,
    pub verified_accounts: usize,
    pub popular_accounts: usize,
    pub total_retweets: u128,
    pub total_favourites: u128,
    pub total_followers: u128,
    pub total_friends: u128,
    pub total_statuses: u128,
    pub total_account_age_days: u128,
    pub unique_hashtags: usize,
    pub unique_mentions: usize,
    /// Unique accounts by gender: male, female, undetermined.
    pub gender: [usize; 3],
}

fn mean(total: u128, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

fn share(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

impl ClassAggregates {
    pub fn verified_share(&self) -> f64 {
        share(self.verified_accounts, self.unique_accounts)
    }
    pub fn popular_share(&self) -> f64 {
        share(self.popular_accounts, self.unique_accounts)
    }
    pub fn mean_retweets(&self) -> f64 {
        mean(self.total_retweets, self.tweets)
    }
    pub fn mean_favourites(&self) -> f64 {
        mean(self.total_favourites, self.tweets)
    }
    pub fn mean_followers(&self) -> f64 {
        mean(self.total_followers, self.tweets)
    }
    pub fn mean_friends(&self) -> f64 {
        mean(self.total_friends, self.tweets)
    }
    pub fn mean_statuses(&self) -> f64 {
        mean(self.total_statuses, self.tweets)
    }
    pub fn mean_account_age(&self) -> f64 {
        mean(self.total_account_age_days, self.tweets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Grouping {
    Gender,
    Verified,
    Popularity,
}

impl Grouping {
    pub const ALL: [Grouping; 3] = [Grouping::Gender, Grouping::Verified, Grouping::Popularity];

    pub fn name(self) -> &'static str {
        match self {
            Grouping::Gender => "gender",
            Grouping::Verified => "verified",
            Grouping::Popularity => "popularity",
        }
    }

    fn groups(self) -> &'static [&'static str] {
        match self {
            Grouping::Gender => &["male", "female", "undetermined"],
            Grouping::Verified => &["verified", "unverified"],
            Grouping::Popularity => &["popular", "not popular"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionRow {
    pub class: BinaryLabel,
    pub group: &'static str,
    pub tweets: usize,
    pub total_retweets: u128,
    pub total_favourites: u128,
}

impl DiffusionRow {
    pub fn mean_retweets(&self) -> f64 {
        mean(self.total_retweets, self.tweets)
    }
    pub fn mean_favourites(&self) -> f64 {
        mean(self.total_favourites, self.tweets)
    }
}

/// Rows ordered by class (Misinformation first) then group; empty groups are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTable {
    pub grouping: Grouping,
    pub rows: Vec<DiffusionRow>,
}

impl DiffusionTable {
    pub fn row(&self, class: BinaryLabel, group: &str) -> Option<&DiffusionRow> {
        self.rows.iter().find(|r| r.class == class && r.group == group)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    pub misinformation: ClassAggregates,
    pub other: ClassAggregates,
    pub diffusion: Vec<DiffusionTable>,
}

impl PropagationReport {
    pub fn class(&self, label: BinaryLabel) -> &ClassAggregates {
        match label {
            BinaryLabel::Misinformation => &self.misinformation,
            BinaryLabel::Other => &self.other,
        }
    }
}

/// Account traits fixed at each handle's earliest tweet.
struct AccountTraits {
    verified: bool,
    popular: bool,
    gender: Gender,
}

fn gender_slot(g: Gender) -> usize {
    match g {
        Gender::Male => 0,
        Gender::Female => 1,
        Gender::Undetermined => 2,
    }
}

fn index_enrichments<'a>(dataset: &Dataset, enrichments: &'a [EnrichmentRecord]) -> Result<Vec<&'a EnrichmentRecord>, PropagationError> {
    let by_id: HashMap<&str, &EnrichmentRecord> = enrichments.iter().map(|e| (e.tweet_id.as_str(), e)).collect();
    dataset
        .records
        .iter()
        .map(|r| by_id.get(r.record.tweet_id.as_str()).copied().ok_or_else(|| PropagationError::CoverageGap(r.record.tweet_id.clone())))
        .collect()
}

/// Traits per handle within one class, taken from the account's earliest
/// tweet (posting time, then tweet id) so record order does not matter.
fn account_traits<'a>(rows: &[(&'a LabeledTweet, &EnrichmentRecord)]) -> HashMap<&'a str, AccountTraits> {
    let mut first: HashMap<&'a str, (&'a LabeledTweet, &EnrichmentRecord)> = HashMap::new();
    for &(t, e) in rows {
        let key = |t: &LabeledTweet| (t.record.created_at, t.record.tweet_id.clone());
        first
            .entry(t.record.user.handle.as_str())
            .and_modify(|cur| {
                if key(t) < key(cur.0) {
                    *cur = (t, e);
                }
            })
            .or_insert((t, e));
    }
    first
        .into_iter()
        .map(|(h, (t, e))| (h, AccountTraits { verified: t.record.user.verified, popular: e.popular, gender: e.gender }))
        .collect()
}

fn class_rows<'a, 'e>(
    dataset: &'a Dataset,
    enr: &[&'e EnrichmentRecord],
    label: BinaryLabel,
) -> Vec<(&'a LabeledTweet, &'e EnrichmentRecord)> {
    dataset.records.iter().zip(enr).filter(|(t, _)| t.label == label).map(|(t, e)| (t, *e)).collect()
}

fn aggregate(rows: &[(&LabeledTweet, &EnrichmentRecord)]) -> ClassAggregates {
    let accounts = account_traits(rows);
    let mut a = ClassAggregates { tweets: rows.len(), unique_accounts: accounts.len(), ..Default::default() };
    for t in accounts.values() {
        a.verified_accounts += usize::from(t.verified);
        a.popular_accounts += usize::from(t.popular);
        a.gender[gender_slot(t.gender)] += 1;
    }
    let mut hashtags = HashSet::new();
    let mut mentions = HashSet::new();
    for (t, e) in rows {
        let r = &t.record;
        a.total_retweets += u128::from(r.retweet_count);
        a.total_favourites += u128::from(r.favourite_count);
        a.total_followers += u128::from(r.user.followers_count);
        a.total_friends += u128::from(r.user.friends_count);
        a.total_statuses += u128::from(r.user.statuses_count);
        a.total_account_age_days += u128::from(e.account_age_days);
        hashtags.extend(r.hashtags.iter().map(String::as_str));
        mentions.extend(r.mentions.iter().map(String::as_str));
    }
    a.unique_hashtags = hashtags.len();
    a.unique_mentions = mentions.len();
    a
}

pub fn diffusion_by_group(
    dataset: &Dataset,
    enrichments: &[EnrichmentRecord],
    grouping: Grouping,
) -> Result<DiffusionTable, PropagationError> {
    let enr = index_enrichments(dataset, enrichments)?;
    let mut rows = Vec::new();
    for class in BinaryLabel::ALL {
        let cr = class_rows(dataset, &enr, class);
        let traits = account_traits(&cr);
        let mut tally: Vec<(usize, u128, u128)> = vec![(0, 0, 0); grouping.groups().len()];
        for (t, _) in &cr {
            let a = &traits[t.record.user.handle.as_str()];
            let g = match grouping {
                Grouping::Gender => gender_slot(a.gender),
                Grouping::Verified => usize::from(!a.verified),
                Grouping::Popularity => usize::from(!a.popular),
            };
            tally[g].0 += 1;
            tally[g].1 += u128::from(t.record.retweet_count);
            tally[g].2 += u128::from(t.record.favourite_count);
        }
        for (g, (n, rt, fav)) in tally.into_iter().enumerate() {
            if n > 0 {
                rows.push(DiffusionRow { class, group: grouping.groups()[g], tweets: n, total_retweets: rt, total_favourites: fav });
            }
        }
    }
    Ok(DiffusionTable { grouping, rows })
}

pub fn descriptive_stats(dataset: &Dataset, enrichments: &[EnrichmentRecord]) -> Result<PropagationReport, PropagationError> {
    let enr = index_enrichments(dataset, enrichments)?;
    let diffusion = Grouping::ALL.iter().map(|&g| diffusion_by_group(dataset, enrichments, g)).collect::<Result<_, _>>()?;
    Ok(PropagationReport {
        misinformation: aggregate(&class_rows(dataset, &enr, BinaryLabel::Misinformation)),
        other: aggregate(&class_rows(dataset, &enr, BinaryLabel::Other)),
        diffusion,
    })
}

fn summary_rows(a: &ClassAggregates) -> Vec<(&'static str, String, String)> {
    let pct = |s: f64| format!("{s:.0}%");
    let m = |x: f64| format!("{x:.2}");
    vec![
        ("Number of Tweets", a.tweets.to_string(), a.tweets.to_string()),
        ("Unique Account", a.unique_accounts.to_string(), a.unique_accounts.to_string()),
        (
            "Verified Account",
            format!("{} ({})", a.verified_accounts, pct(a.verified_share())),
            format!("{}\t{}", a.verified_accounts, a.verified_share()),
        ),
        (
            "Popularity of Account",
            format!("{} ({})", a.popular_accounts, pct(a.popular_share())),
            format!("{}\t{}", a.popular_accounts, a.popular_share()),
        ),
        ("Mean Retweet Count", m(a.mean_retweets()), a.mean_retweets().to_string()),
        ("Mean Favourite Count", m(a.mean_favourites()), a.mean_favourites().to_string()),
        ("Mean Followers Count", m(a.mean_followers()), a.mean_followers().to_string()),
        ("Mean Friends Count", m(a.mean_friends()), a.mean_friends().to_string()),
        ("Mean Status Count", m(a.mean_statuses()), a.mean_statuses().to_string()),
        ("Mean Account Age (days)", m(a.mean_account_age()), a.mean_account_age().to_string()),
        ("Unique Hashtags", a.unique_hashtags.to_string(), a.unique_hashtags.to_string()),
        ("Unique Mentions", a.unique_mentions.to_string(), a.unique_mentions.to_string()),
        (
            "Gender (Male/Female/Unknown)",
            format!("{}/{}/{}", a.gender[0], a.gender[1], a.gender[2]),
            format!("{}/{}/{}", a.gender[0], a.gender[1], a.gender[2]),
        ),
    ]
}

/// Plain-text tables: the class summary followed by one table per grouping.
pub fn render_propagation_text(report: &PropagationReport) -> String {
    let mut out = String::new();
    writeln!(out, "Parameter | Misinformation | Other").unwrap();
    for ((name, mis, _), (_, oth, _)) in summary_rows(&report.misinformation).into_iter().zip(summary_rows(&report.other)) {
        writeln!(out, "{name} | {mis} | {oth}").unwrap();
    }
    for table in &report.diffusion {
        writeln!(out, "\nDiffusion by {}", table.grouping.name()).unwrap();
        writeln!(out, "Class | Group | Tweets | Mean Retweet Count | Mean Favourite Count").unwrap();
        for r in &table.rows {
            writeln!(out, "{} | {} | {} | {:.2} | {:.2}", r.class.name(), r.group, r.tweets, r.mean_retweets(), r.mean_favourites())
                .unwrap();
        }
    }
    out
}

/// Tab-separated: `section, class, key, value[, value]` with full-precision numbers.
pub fn render_propagation_delimited(report: &PropagationReport) -> String {
    let mut out = String::from("section\tclass\tkey\tvalue\textra\n");
    for class in BinaryLabel::ALL {
        for (name, _, raw) in summary_rows(report.class(class)) {
            let (value, extra) = raw.split_once('\t').unwrap_or((&raw, ""));
            writeln!(out, "summary\t{}\t{name}\t{value}\t{extra}", class.name()).unwrap();
        }
    }
    for table in &report.diffusion {
        for r in &table.rows {
            let section = format!("diffusion_{}", table.grouping.name());
            writeln!(out, "{section}\t{}\t{} tweets\t{}\t", r.class.name(), r.group, r.tweets).unwrap();
            writeln!(out, "{section}\t{}\t{} mean retweet\t{}\t", r.class.name(), r.group, r.mean_retweets()).unwrap();
            writeln!(out, "{section}\t{}\t{} mean favourite\t{}\t", r.class.name(), r.group, r.mean_favourites()).unwrap();
        }
    }
    out
}

/// Distinct groups present in a table, for callers that iterate groups.
pub fn present_groups(table: &DiffusionTable) -> BTreeSet<&'static str> {
    table.rows.iter().map(|r| r.group).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{enrichment_for, tweet};
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn dataset(rows: Vec<(crate::corpus::TweetRecord, BinaryLabel)>) -> Dataset {
        Dataset {
            records: rows.into_iter().map(|(record, label)| LabeledTweet { record, label }).collect(),
            source_manifest: PathBuf::from("mem.jsonl"),
            schema_version: 1,
        }
    }

    #[test]
    fn same_account_two_tweets() {
        let mut a = tweet("1", "Anna", 10, 5);
        let mut b = tweet("2", "Anna", 10, 5);
        b.user.handle = a.user.handle.clone();
        a.retweet_count = 2;
        b.retweet_count = 4;
        let ds = dataset(vec![(a.clone(), BinaryLabel::Misinformation), (b.clone(), BinaryLabel::Misinformation)]);
        let r = descriptive_stats(&ds, &[enrichment_for(&a), enrichment_for(&b)]).unwrap();
        assert_eq!(r.misinformation.tweets, 2);
        assert_eq!(r.misinformation.unique_accounts, 1);
        assert_eq!(r.misinformation.mean_retweets(), 3.0);
        assert_eq!(r.other, ClassAggregates::default());
    }

    #[test]
    fn gender_triple() {
        let recs: Vec<_> = ["1", "2", "3"].iter().map(|id| tweet(id, "x", 1, 1)).collect();
        let mut enr: Vec<_> = recs.iter().map(enrichment_for).collect();
        enr[0].gender = Gender::Male;
        enr[1].gender = Gender::Female;
        enr[2].gender = Gender::Undetermined;
        let ds = dataset(recs.into_iter().map(|r| (r, BinaryLabel::Other)).collect());
        let r = descriptive_stats(&ds, &enr).unwrap();
        assert_eq!(r.other.gender, [1, 1, 1]);
    }

    #[test]
    fn coverage_gap() {
        let a = tweet("1", "x", 1, 1);
        let ds = dataset(vec![(a, BinaryLabel::Other)]);
        assert_eq!(descriptive_stats(&ds, &[]), Err(PropagationError::CoverageGap("1".into())));
    }

    #[test]
    fn verified_double_retweets_and_absent_female() {
        let mut recs = Vec::new();
        for i in 0..4 {
            let mut r = tweet(&i.to_string(), "x", 1, 1);
            r.user.verified = i % 2 == 0;
            r.retweet_count = if r.user.verified { 20 } else { 10 };
            recs.push(r);
        }
        let mut enr: Vec<_> = recs.iter().map(enrichment_for).collect();
        enr.iter_mut().for_each(|e| e.gender = Gender::Male);
        let ds = dataset(recs.into_iter().map(|r| (r, BinaryLabel::Misinformation)).collect());
        let v = diffusion_by_group(&ds, &enr, Grouping::Verified).unwrap();
        let m = BinaryLabel::Misinformation;
        assert_eq!(v.row(m, "verified").unwrap().mean_retweets(), 2.0 * v.row(m, "unverified").unwrap().mean_retweets());
        let g = diffusion_by_group(&ds, &enr, Grouping::Gender).unwrap();
        assert!(g.row(m, "female").is_none());
        assert_eq!(present_groups(&g), BTreeSet::from(["male"]));
    }

    #[test]
    fn six_record_hand_computation() {
        // (class, verified, retweets, favourites)
        let spec = [
            (BinaryLabel::Misinformation, true, 10, 1),
            (BinaryLabel::Misinformation, false, 4, 3),
            (BinaryLabel::Misinformation, false, 8, 5),
            (BinaryLabel::Other, true, 1, 7),
            (BinaryLabel::Other, true, 3, 9),
            (BinaryLabel::Other, false, 6, 0),
        ];
        let rows: Vec<_> = spec
            .iter()
            .enumerate()
            .map(|(i, &(c, v, rt, fav))| {
                let mut r = tweet(&i.to_string(), "x", 1, 1);
                r.user.verified = v;
                r.retweet_count = rt;
                r.favourite_count = fav;
                (r, c)
            })
            .collect();
        let enr: Vec<_> = rows.iter().map(|(r, _)| enrichment_for(r)).collect();
        let t = diffusion_by_group(&dataset(rows), &enr, Grouping::Verified).unwrap();
        let get = |c, g| {
            let r = t.row(c, g).unwrap();
            (r.tweets, r.mean_retweets(), r.mean_favourites())
        };
        assert_eq!(get(BinaryLabel::Misinformation, "verified"), (1, 10.0, 1.0));
        assert_eq!(get(BinaryLabel::Misinformation, "unverified"), (2, 6.0, 4.0));
        assert_eq!(get(BinaryLabel::Other, "verified"), (2, 2.0, 8.0));
        assert_eq!(get(BinaryLabel::Other, "unverified"), (1, 6.0, 0.0));
    }

    #[test]
    fn earliest_snapshot_wins() {
        let mut a = tweet("1", "x", 1, 1);
        let mut b = tweet("2", "x", 1, 1);
        b.user.handle = a.user.handle.clone();
        a.user.verified = true;
        b.user.verified = false;
        let enr = [enrichment_for(&a), enrichment_for(&b)];
        for order in [[&a, &b], [&b, &a]] {
            let ds = dataset(order.iter().map(|t| ((*t).clone(), BinaryLabel::Other)).collect());
            let r = descriptive_stats(&ds, &enr).unwrap();
            assert_eq!((r.other.unique_accounts, r.other.verified_accounts), (1, 1));
            assert_eq!(r.diffusion[1].row(BinaryLabel::Other, "verified").unwrap().tweets, 2);
        }
        b.created_at = a.created_at - chrono::Duration::hours(1);
        let ds = dataset(vec![(a.clone(), BinaryLabel::Other), (b.clone(), BinaryLabel::Other)]);
        let r = descriptive_stats(&ds, &[enrichment_for(&a), enrichment_for(&b)]).unwrap();
        assert_eq!(r.other.verified_accounts, 0);
    }

    #[test]
    fn rendering_is_table_shaped() {
        let a = tweet("1", "x", 10, 1);
        let ds = dataset(vec![(a.clone(), BinaryLabel::Misinformation)]);
        let r = descriptive_stats(&ds, &[enrichment_for(&a)]).unwrap();
        let text = render_propagation_text(&r);
        assert!(text.starts_with("Parameter | Misinformation | Other\nNumber of Tweets | 1 | 0\n"));
        assert!(text.contains("Popularity of Account | 1 (100%) | 0 (0%)"));
        let tsv = render_propagation_delimited(&r);
        assert!(tsv.contains("summary\tmisinformation\tVerified Account\t0\t0\n"));
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(u8, bool, u8, u32, u32, u8)>> {
        proptest::collection::vec((0u8..6, any::<bool>(), 0u8..3, 0u32..1000, 0u32..1000, 0u8..2), 1..40)
    }

    fn build(rows: &[(u8, bool, u8, u32, u32, u8)]) -> (Dataset, Vec<EnrichmentRecord>) {
        let mut recs = Vec::new();
        let mut enr = Vec::new();
        for (i, &(acct, verified, g, rt, fav, class)) in rows.iter().enumerate() {
            let mut r = tweet(&i.to_string(), "x", 1, 1);
            r.user.handle = format!("acct{acct}");
            r.user.verified = verified;
            r.retweet_count = rt.into();
            r.favourite_count = fav.into();
            let mut e = enrichment_for(&r);
            e.gender = Gender::ALL[g as usize];
            enr.push(e);
            recs.push((r, if class == 0 { BinaryLabel::Misinformation } else { BinaryLabel::Other }));
        }
        (dataset(recs), enr)
    }

    proptest! {
        #[test]
        fn group_means_are_consistent(rows in arb_rows()) {
            let (ds, enr) = build(&rows);
            let rep = descriptive_stats(&ds, &enr).unwrap();
            for t in &rep.diffusion {
                for class in BinaryLabel::ALL {
                    let total: f64 = t.rows.iter().filter(|r| r.class == class).map(|r| r.tweets as f64 * r.mean_retweets()).sum();
                    let want = rep.class(class).total_retweets as f64;
                    prop_assert!((total - want).abs() <= 1e-9 * want.max(1.0));
                }
            }
            for class in BinaryLabel::ALL {
                let a = rep.class(class);
                prop_assert_eq!(a.gender.iter().sum::<usize>(), a.unique_accounts);
                prop_assert!(a.unique_accounts <= a.tweets);
                prop_assert!((0.0..=100.0).contains(&a.verified_share()));
            }
        }

        #[test]
        fn record_order_does_not_change_report(rows in arb_rows()) {
            let (ds, enr) = build(&rows);
            let mut rev = ds.clone();
            rev.records.reverse();
            let a = descriptive_stats(&ds, &enr).unwrap();
            let b = descriptive_stats(&rev, &enr).unwrap();
            prop_assert_eq!(render_propagation_delimited(&a), render_propagation_delimited(&b));
        }
    }
}
