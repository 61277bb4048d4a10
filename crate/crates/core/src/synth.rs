//! Synthetic corpora: a benchmark whose label signal is split across the
//! three modalities, and propagation fixtures that hit chosen per-class
//! aggregates exactly.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BinaryLabel, CorpusError, Dataset, LabeledTweet, TweetRecord, UserSnapshot, SCHEMA_VERSION};
use crate::propagation::ClassAggregates;
use crate::vision::RgbImage;

const POSITIVE_WORDS: [&str; 6] = ["hoax", "rigged", "plandemic", "fraud", "coverup", "microchip"];
const NEGATIVE_WORDS: [&str; 6] = ["forecast", "garden", "recipe", "concert", "library", "harvest"];
/// Low-saturation tints: distinct to a histogram, invisible to the palette detector and OCR.
const WARM: [u8; 3] = [200, 180, 180];
const COOL: [u8; 3] = [180, 180, 200];
const DISPLAY_NAMES: [&str; 4] = ["James Carter", "Mary Lopez", "Robin Hale", "Newsdesk"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub misinformation: usize,
    pub other: usize,
    pub tokens_per_text: usize,
    pub image_side: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { misinformation: 1273, other: 256, tokens_per_text: 20, image_side: 8, seed: 2023 }
    }
}

/// Records with their images, not yet written anywhere. Each record's
/// `media_path` is relative (`images/<id>.png`).
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub records: Vec<LabeledTweet>,
    pub images: Vec<(PathBuf, RgbImage)>,
}

impl SyntheticCorpus {
    /// Writes `manifest.jsonl` and the images under `dir`; returns the manifest path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, CorpusError> {
        fs::create_dir_all(dir.join("images"))?;
        for (rel, img) in &self.images {
            img.save_png(&dir.join(rel)).map_err(|e| CorpusError::Io(std::io::Error::other(e.to_string())))?;
        }
        let manifest = dir.join("manifest.jsonl");
        self.dataset(&manifest).write_manifest(&manifest)?;
        Ok(manifest)
    }

    pub fn dataset(&self, manifest: &Path) -> Dataset {
        Dataset { records: self.records.clone(), source_manifest: manifest.to_path_buf(), schema_version: SCHEMA_VERSION }
    }
}

fn verdict(label: BinaryLabel) -> &'static str {
    match label {
        BinaryLabel::Misinformation => "false",
        BinaryLabel::Other => "true",
    }
}

fn tweet_time(i: usize) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(i as i64)
}

/// Each record draws three independent uniform scores, one per modality.
/// The `misinformation` records with the largest score sum are positive.
/// Text carries its score as the share of words from a positive pool, the
/// image as the share of warm pixels, and the social block as the
/// favourite count; every other field is noise.
pub fn generate_benchmark(cfg: &BenchmarkConfig) -> SyntheticCorpus {
    let n = cfg.misinformation + cfg.other;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scores: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&a, &b| {
        let (sa, sb) = (scores[a].iter().sum::<f64>(), scores[b].iter().sum::<f64>());
        sb.total_cmp(&sa).then(a.cmp(&b))
    });
    let mut labels = vec![BinaryLabel::Other; n];
    for &i in &rank[..cfg.misinformation] {
        labels[i] = BinaryLabel::Misinformation;
    }

    let pixels = cfg.image_side * cfg.image_side;
    let mut records = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    for (i, [st, si, ss]) in scores.into_iter().enumerate() {
        let id = format!("syn{i:05}");
        let positives = (st * cfg.tokens_per_text as f64).round() as usize;
        let mut words: Vec<&str> = (0..cfg.tokens_per_text)
            .map(|k| if k < positives { POSITIVE_WORDS[rng.gen_range(0..6)] } else { NEGATIVE_WORDS[rng.gen_range(0..6)] })
            .collect();
        words.shuffle(&mut rng);

        let warm = (si * pixels as f64).round() as usize;
        let mut cells: Vec<bool> = (0..pixels).map(|k| k < warm).collect();
        cells.shuffle(&mut rng);
        let mut img = RgbImage::filled(cfg.image_side, cfg.image_side, COOL);
        for (k, &w) in cells.iter().enumerate() {
            if w {
                img.set(k % cfg.image_side, k / cfg.image_side, WARM);
            }
        }
        let rel = PathBuf::from(format!("images/{id}.png"));
        images.push((rel.clone(), img));

        let created = tweet_time(i);
        let record = TweetRecord {
            tweet_id: id.clone(),
            text: words.join(" "),
            language: "en".into(),
            created_at: created,
            hashtags: vec![],
            mentions: vec![],
            media_path: Some(rel),
            user: UserSnapshot {
                handle: format!("acct{}", rng.gen_range(0..n)),
                display_name: DISPLAY_NAMES[rng.gen_range(0..DISPLAY_NAMES.len())].into(),
                followers_count: rng.gen_range(0..5000),
                friends_count: rng.gen_range(0..5000),
                favorites_count: rng.gen_range(0..1000),
                statuses_count: rng.gen_range(0..10_000),
                verified: rng.gen_bool(0.3),
                account_created_at: created - Duration::days(rng.gen_range(30..3000)),
            },
            retweet_count: rng.gen_range(0..100),
            favourite_count: (ss * 10_000.0).round() as u64,
            retweeted: false,
            raw_verdict: verdict(labels[i]).into(),
        };
        records.push(LabeledTweet { record, label: labels[i] });
    }
    SyntheticCorpus { records, images }
}

/// Per-class aggregates a propagation fixture must reproduce. Means are
/// tweet-level and integral, so totals are `tweets * mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTargets {
    pub tweets: usize,
    pub unique_accounts: usize,
    pub verified: usize,
    pub popular: usize,
    pub mean_retweets: u64,
    pub mean_favourites: u64,
    pub mean_followers: u64,
    pub mean_friends: u64,
    pub mean_statuses: u64,
    pub mean_account_age: u64,
    pub unique_hashtags: usize,
    pub unique_mentions: usize,
    /// Male, female, undetermined accounts.
    pub gender: [usize; 3],
}

/// The two classes' figures from the descriptive table of the source study.
pub fn reference_targets() -> (ClassTargets, ClassTargets) {
    (
        ClassTargets {
            tweets: 1273,
            unique_accounts: 1054,
            verified: 612,
            popular: 939,
            mean_retweets: 4768,
            mean_favourites: 15706,
            mean_followers: 1_177_680,
            mean_friends: 2935,
            mean_statuses: 48008,
            mean_account_age: 3801,
            unique_hashtags: 433,
            unique_mentions: 425,
            gender: [427, 169, 458],
        },
        ClassTargets {
            tweets: 256,
            unique_accounts: 229,
            verified: 125,
            popular: 205,
            mean_retweets: 4333,
            mean_favourites: 10195,
            mean_followers: 1_874_661,
            mean_friends: 2445,
            mean_statuses: 44947,
            mean_account_age: 3914,
            unique_hashtags: 94,
            unique_mentions: 84,
            gender: [97, 27, 105],
        },
    )
}

impl ClassTargets {
    fn check(&self) -> Result<(), String> {
        let t = self.tweets;
        let a = self.unique_accounts;
        if a == 0 || a > t {
            return Err(format!("need 1 <= accounts ({a}) <= tweets ({t})"));
        }
        if self.verified > a || self.popular > a || self.gender.iter().sum::<usize>() != a {
            return Err("account-level counts must fit within the accounts".into());
        }
        if self.unique_hashtags > t || self.unique_mentions > t {
            return Err("more unique hashtags or mentions than tweets".into());
        }
        if !(ACCOUNT_AGE_MIN..=ACCOUNT_AGE_MAX).contains(&self.mean_account_age) {
            return Err(format!("mean account age must lie in [{ACCOUNT_AGE_MIN}, {ACCOUNT_AGE_MAX}]"));
        }
        Ok(())
    }
}

const ACCOUNT_AGE_MIN: u64 = 800;
const ACCOUNT_AGE_MAX: u64 = 4900;

#[derive(Debug, Clone)]
pub struct PropagationFixture {
    pub dataset: Dataset,
    /// The generator's own tallies, `[misinformation, other]`.
    pub bookkeeping: [ClassAggregates; 2],
    pub reference_date: NaiveDate,
}

/// `n` non-negative integers summing to `n * mean`, scattered around the mean.
fn spread(rng: &mut ChaCha8Rng, n: usize, mean: u64) -> Vec<u64> {
    let target = n as i128 * mean as i128;
    let lo = mean / 2;
    let hi = mean + mean / 2;
    let mut v: Vec<i128> = (0..n).map(|_| rng.gen_range(lo..=hi) as i128).collect();
    let diff = target - v.iter().sum::<i128>();
    let (q, r) = (diff.div_euclid(n as i128), diff.rem_euclid(n as i128));
    for (k, x) in v.iter_mut().enumerate() {
        *x += q + i128::from((k as i128) < r);
    }
    if v.iter().any(|&x| x < 0) {
        let (q, r) = (target / n as i128, target % n as i128);
        v = (0..n).map(|k| q + i128::from((k as i128) < r)).collect();
    }
    v.into_iter().map(|x| x as u64).collect()
}

/// A stride coprime with `n`, so `i -> i * stride mod n` is a permutation.
fn coprime_stride(n: usize, from: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (from..).find(|&s| gcd(s, n) == 1).expect("some stride is coprime")
}

struct ClassBuild {
    records: Vec<LabeledTweet>,
    tally: ClassAggregates,
}

fn build_class(
    t: &ClassTargets,
    label: BinaryLabel,
    prefix: &str,
    reference: NaiveDate,
    rng: &mut ChaCha8Rng,
    first_index: usize,
) -> Result<ClassBuild, String> {
    t.check()?;
    let (n, a) = (t.tweets, t.unique_accounts);

    // Tweet k belongs to account k for k < a; the rest cycle over accounts 1.. so
    // account 0 keeps exactly one tweet and can absorb rounding in the age total.
    let owner: Vec<usize> = (0..n)
        .map(|k| {
            if k < a {
                k
            } else if a == 1 {
                0
            } else {
                1 + (k - a) % (a - 1)
            }
        })
        .collect();
    let mut weight = vec![0u64; a];
    owner.iter().for_each(|&o| weight[o] += 1);

    let pop_stride = coprime_stride(a, 7);
    let popular: Vec<bool> = (0..a).map(|i| (i * pop_stride) % a < t.popular).collect();
    let gender_stride = coprime_stride(a, 11);
    let gender_of = |i: usize| {
        let slot = (i * gender_stride) % a;
        if slot < t.gender[0] {
            0
        } else if slot < t.gender[0] + t.gender[1] {
            1
        } else {
            2
        }
    };

    // Account ages: everyone at the mean, then equal-weight accounts moved in
    // opposite directions so the tweet-weighted total stays exact.
    let mean_age = t.mean_account_age as i64;
    let (lo, hi) = (ACCOUNT_AGE_MIN as i64, ACCOUNT_AGE_MAX as i64);
    let mut age = vec![mean_age; a];
    let mut by_weight: std::collections::BTreeMap<u64, Vec<usize>> = std::collections::BTreeMap::new();
    (0..a).for_each(|i| by_weight.entry(weight[i]).or_default().push(i));
    for group in by_weight.values() {
        for pair in group.chunks_exact(2) {
            let room = (hi - mean_age).min(mean_age - lo).min(600);
            let d = rng.gen_range(-room..=room);
            age[pair[0]] += d;
            age[pair[1]] -= d;
        }
    }

    let retweets = spread(rng, n, t.mean_retweets);
    let favourites = spread(rng, n, t.mean_favourites);
    let friends = spread(rng, n, t.mean_friends);
    let statuses = spread(rng, n, t.mean_statuses);

    // Followers: at most `friends` on unpopular accounts' tweets, above it on popular ones.
    let target_followers = n as u128 * t.mean_followers as u128;
    let pop_tweets: Vec<usize> = (0..n).filter(|&k| popular[owner[k]]).collect();
    let mut followers = vec![0u64; n];
    let floor: u128 = pop_tweets.iter().map(|&k| friends[k] as u128 + 1).sum();
    if pop_tweets.is_empty() {
        let cap: u128 = friends.iter().map(|&f| f as u128).sum();
        if target_followers > cap {
            return Err("follower target needs popular accounts".into());
        }
        let mut left = target_followers;
        for k in 0..n {
            let take = left.min(friends[k] as u128);
            followers[k] = take as u64;
            left -= take;
        }
    } else {
        if target_followers < floor {
            return Err("follower target too small for the popular accounts".into());
        }
        let extra = target_followers - floor;
        let (q, r) = (extra / pop_tweets.len() as u128, extra % pop_tweets.len() as u128);
        for (j, &k) in pop_tweets.iter().enumerate() {
            followers[k] = (friends[k] as u128 + 1 + q + u128::from((j as u128) < r)) as u64;
        }
    }

    let mut tally = ClassAggregates { tweets: n, unique_accounts: a, ..Default::default() };
    for i in 0..a {
        tally.verified_accounts += usize::from(i < t.verified);
        tally.popular_accounts += usize::from(popular[i]);
        tally.gender[gender_of(i)] += 1;
    }
    let midnight = Utc.from_utc_datetime(&reference.and_hms_opt(0, 0, 0).expect("valid time"));
    let mut records = Vec::with_capacity(n);
    let (h, m) = (t.unique_hashtags, t.unique_mentions);
    for k in 0..n {
        let o = owner[k];
        let hashtags = if h == 0 { vec![] } else { vec![format!("{prefix}tag{}", k % h), format!("{prefix}tag{}", (k * 7 + 3) % h)] };
        let mentions = if m == 0 { vec![] } else { vec![format!("{prefix}user{}", k % m)] };
        let display_name = match gender_of(o) {
            0 => format!("James {prefix}{o}"),
            1 => format!("Mary {prefix}{o}"),
            _ => format!("Newsdesk {prefix}{o}"),
        };
        let record = TweetRecord {
            tweet_id: format!("{prefix}{k:05}"),
            text: format!("fixture post {k}"),
            language: "en".into(),
            created_at: tweet_time(first_index + k),
            hashtags,
            mentions,
            media_path: None,
            user: UserSnapshot {
                handle: format!("{prefix}acct{o}"),
                display_name,
                followers_count: followers[k],
                friends_count: friends[k],
                favorites_count: 0,
                statuses_count: statuses[k],
                verified: o < t.verified,
                account_created_at: midnight - Duration::days(age[o]),
            },
            retweet_count: retweets[k],
            favourite_count: favourites[k],
            retweeted: false,
            raw_verdict: verdict(label).into(),
        };
        tally.total_retweets += u128::from(retweets[k]);
        tally.total_favourites += u128::from(favourites[k]);
        tally.total_followers += u128::from(followers[k]);
        tally.total_friends += u128::from(friends[k]);
        tally.total_statuses += u128::from(statuses[k]);
        tally.total_account_age_days += age[o] as u128;
        records.push(LabeledTweet { record, label });
    }
    tally.unique_hashtags = h;
    tally.unique_mentions = m;
    Ok(ClassBuild { records, tally })
}

/// Builds both classes, interleaved in a seed-determined order.
pub fn generate_propagation_fixture(
    misinformation: &ClassTargets,
    other: &ClassTargets,
    reference_date: NaiveDate,
    seed: u64,
) -> Result<PropagationFixture, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = build_class(misinformation, BinaryLabel::Misinformation, "f", reference_date, &mut rng, 0)?;
    let o = build_class(other, BinaryLabel::Other, "o", reference_date, &mut rng, misinformation.tweets)?;
    let mut records: Vec<LabeledTweet> = m.records.into_iter().chain(o.records).collect();
    records.shuffle(&mut rng);
    Ok(PropagationFixture {
        dataset: Dataset { records, source_manifest: PathBuf::from("fixture.jsonl"), schema_version: SCHEMA_VERSION },
        bookkeeping: [m.tally, o.tally],
        reference_date,
    })
}

/// Random but feasible targets, for property tests over many fixtures.
pub fn random_targets(rng: &mut impl Rng) -> ClassTargets {
    let tweets = rng.gen_range(1..120);
    let unique_accounts = rng.gen_range(1..=tweets);
    let male = rng.gen_range(0..=unique_accounts);
    let female = rng.gen_range(0..=unique_accounts - male);
    let mean_friends = rng.gen_range(0..3000);
    ClassTargets {
        tweets,
        unique_accounts,
        verified: rng.gen_range(0..=unique_accounts),
        popular: rng.gen_range(1..=unique_accounts),
        mean_retweets: rng.gen_range(0..10_000),
        mean_favourites: rng.gen_range(0..20_000),
        mean_followers: mean_friends * 10 + rng.gen_range(10..100_000),
        mean_friends,
        mean_statuses: rng.gen_range(0..50_000),
        mean_account_age: rng.gen_range(1500..4200),
        unique_hashtags: rng.gen_range(0..=tweets),
        unique_mentions: rng.gen_range(0..=tweets),
        gender: [male, female, unique_accounts - male - female],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrichment::default_reference_date;

    #[test]
    fn benchmark_shape() {
        let c = generate_benchmark(&BenchmarkConfig::default());
        let pos = c.records.iter().filter(|r| r.label.is_positive()).count();
        assert_eq!((c.records.len(), pos), (1529, 1273));
        assert_eq!(c.images.len(), 1529);
        let r = &c.records[0].record;
        assert_eq!(r.text.split(' ').count(), 20);
        assert!(r.text.split(' ').all(|w| POSITIVE_WORDS.contains(&w) || NEGATIVE_WORDS.contains(&w)));
    }

    #[test]
    fn benchmark_is_seeded() {
        let a = generate_benchmark(&BenchmarkConfig { misinformation: 20, other: 10, ..Default::default() });
        let b = generate_benchmark(&BenchmarkConfig { misinformation: 20, other: 10, ..Default::default() });
        assert_eq!(a.records, b.records);
        let c = generate_benchmark(&BenchmarkConfig { misinformation: 20, other: 10, seed: 1, ..Default::default() });
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn benchmark_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate_benchmark(&BenchmarkConfig { misinformation: 6, other: 3, ..Default::default() });
        let manifest = c.write_to(dir.path()).unwrap();
        let loaded = crate::corpus::load_dataset(&manifest, &crate::corpus::VerdictAliases::default()).unwrap();
        assert!(loaded.rejects.is_empty());
        assert_eq!(loaded.dataset.class_counts(), (6, 3));
        let img = crate::vision::load_image(&loaded.dataset.resolve_media(&loaded.dataset.records[0].record).unwrap()).unwrap();
        assert_eq!(img, c.images[0].1);
    }

    #[test]
    fn fixture_tallies_match_targets() {
        let (m, o) = reference_targets();
        let f = generate_propagation_fixture(&m, &o, default_reference_date(), 5).unwrap();
        let b = &f.bookkeeping[0];
        assert_eq!((b.tweets, b.unique_accounts, b.verified_accounts, b.popular_accounts), (1273, 1054, 612, 939));
        assert_eq!(b.total_retweets, 1273 * 4768);
        assert_eq!(b.total_followers, 1273 * 1_177_680);
        assert_eq!(b.total_account_age_days, 1273 * 3801);
        assert_eq!(b.gender, [427, 169, 458]);
        assert_eq!(f.bookkeeping[1].gender, [97, 27, 105]);
        assert_eq!(f.dataset.len(), 1529);
    }

    #[test]
    fn infeasible_targets_rejected() {
        let (mut m, o) = reference_targets();
        m.unique_accounts = 2000;
        assert!(generate_propagation_fixture(&m, &o, default_reference_date(), 1).is_err());
    }

    #[test]
    fn spread_hits_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, mean) in [(1, 0), (1, 5), (7, 3), (100, 4768)] {
            let v = spread(&mut rng, n, mean);
            assert_eq!(v.iter().sum::<u64>(), n as u64 * mean);
        }
    }
}
