//! Glue between the stages: enrich a dataset with every adapter, persist the
//! enrichment store, and turn enriched records into encoder inputs.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use log::warn;

use crate::corpus::Dataset;
use crate::enrichment::{enrich, BotScoreClient, EnrichmentError, EnrichmentRecord, GenderDictionary, TextOutputs, VisionOutputs};
use crate::evaluation::PreparedRecord;
use crate::features::{build_social_vector, FeatureError, SocialVectorSchema, TextEncoder};
use crate::textprep::{clean_text, translate_to_english, StopwordList, Translator};
use crate::vision::{load_image, object_text_similarity, try_detect_objects, try_extract_ocr_text, ObjectDetector, OcrEngine, RgbImage};

/// Adapters used while enriching. `similarity_encoder` embeds detected
/// object labels and the caption for the object-text similarity feature.
pub struct Adapters<'a> {
    pub ocr: &'a dyn OcrEngine,
    pub detector: &'a dyn ObjectDetector,
    pub translator: &'a dyn Translator,
    pub bot: Option<&'a BotScoreClient>,
    pub gender: &'a GenderDictionary,
    pub stopwords: &'a StopwordList,
    pub similarity_encoder: &'a dyn TextEncoder,
    pub reference_date: NaiveDate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnrichmentSummary {
    pub records: usize,
    pub bot_scores_fetched: usize,
    pub with_media: usize,
    pub unreadable_images: usize,
    pub ocr_failures: usize,
    pub detector_failures: usize,
    /// Network requests made by the translator and bot client during this run.
    pub external_calls: usize,
}

impl EnrichmentSummary {
    pub fn render(&self) -> String {
        format!(
            "bot_score: {}/{} fetched\nimages: {} referenced, {} unreadable\nocr failures: {}\ndetector failures: {}\nexternal calls: {}\n",
            self.bot_scores_fetched,
            self.records,
            self.with_media,
            self.unreadable_images,
            self.ocr_failures,
            self.detector_failures,
            self.external_calls
        )
    }
}

fn external_calls(a: &Adapters<'_>) -> usize {
    a.translator.external_calls() + a.bot.map_or(0, BotScoreClient::network_calls)
}

fn load_media(dataset: &Dataset, rec: &crate::corpus::TweetRecord) -> Option<Result<RgbImage, String>> {
    let path = dataset.resolve_media(rec)?;
    Some(load_image(&path).map_err(|e| e.to_string()))
}

/// Enriches every record. Adapter failures degrade the affected feature and
/// are counted; only an account created after the reference date aborts.
pub fn enrich_dataset(dataset: &Dataset, adapters: &Adapters<'_>) -> Result<(Vec<EnrichmentRecord>, EnrichmentSummary), EnrichmentError> {
    let calls_before = external_calls(adapters);
    let mut summary = EnrichmentSummary { records: dataset.len(), ..Default::default() };
    let mut out = Vec::with_capacity(dataset.len());
    for lt in &dataset.records {
        let rec = &lt.record;
        let translated_text = translate_to_english(&rec.text, &rec.language, adapters.translator);
        let cleaned_text = clean_text(&translated_text, adapters.stopwords);
        let mut vision = VisionOutputs::default();
        match load_media(dataset, rec) {
            None => {}
            Some(Err(e)) => {
                summary.with_media += 1;
                summary.unreadable_images += 1;
                warn!("{}: {e}", rec.tweet_id);
            }
            Some(Ok(img)) => {
                summary.with_media += 1;
                vision.ocr_text = try_extract_ocr_text(&img, adapters.ocr).unwrap_or_else(|e| {
                    summary.ocr_failures += 1;
                    warn!("{}: {e}", rec.tweet_id);
                    String::new()
                });
                vision.detected_objects = try_detect_objects(&img, adapters.detector).unwrap_or_else(|e| {
                    summary.detector_failures += 1;
                    warn!("{}: {e}", rec.tweet_id);
                    Vec::new()
                });
                let labels: Vec<String> = vision.detected_objects.iter().map(|d| d.label.clone()).collect();
                vision.object_text_similarity = object_text_similarity(&labels, &translated_text, adapters.similarity_encoder);
            }
        }
        let e = enrich(rec, adapters.gender, adapters.bot, vision, TextOutputs { translated_text, cleaned_text }, adapters.reference_date)?;
        summary.bot_scores_fetched += usize::from(e.bot_score.is_some());
        out.push(e);
    }
    summary.external_calls = external_calls(adapters) - calls_before;
    Ok((out, summary))
}

/// Text handed to the text encoder: the cleaned post followed by the cleaned OCR text.
pub fn text_encoder_input(e: &EnrichmentRecord, stopwords: &StopwordList) -> String {
    let ocr = clean_text(&e.ocr_text, stopwords);
    match (e.cleaned_text.is_empty(), ocr.is_empty()) {
        (_, true) => e.cleaned_text.clone(),
        (true, false) => ocr,
        (false, false) => format!("{} {ocr}", e.cleaned_text),
    }
}

/// Encoder inputs per record, in dataset order. Text is absent when nothing
/// survives cleaning, image when there is no readable media. Records with no
/// modality at all are dropped.
pub fn prepare_records(
    dataset: &Dataset,
    enrichments: &[EnrichmentRecord],
    schema: &SocialVectorSchema,
    stopwords: &StopwordList,
) -> Result<Vec<PreparedRecord>, FeatureError> {
    let by_id: HashMap<&str, &EnrichmentRecord> = enrichments.iter().map(|e| (e.tweet_id.as_str(), e)).collect();
    let mut out = Vec::with_capacity(dataset.len());
    for lt in &dataset.records {
        let rec = &lt.record;
        let Some(e) = by_id.get(rec.tweet_id.as_str()) else {
            warn!("{}: no enrichment, skipped", rec.tweet_id);
            continue;
        };
        let text = Some(text_encoder_input(e, stopwords)).filter(|t| !t.is_empty());
        let image = match load_media(dataset, rec) {
            Some(Ok(img)) => Some(Arc::new(img)),
            _ => None,
        };
        let social = Some(build_social_vector(rec, e, schema)?);
        let p = PreparedRecord { tweet_id: rec.tweet_id.clone(), text, image, social };
        if p.text.is_none() && p.image.is_none() && p.social.is_none() {
            warn!("{}: no modality present, dropped", rec.tweet_id);
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

/// Keeps only the records that have prepared features, preserving order.
pub fn restrict_dataset(dataset: &Dataset, prepared: &[PreparedRecord]) -> Dataset {
    let keep: std::collections::HashSet<&str> = prepared.iter().map(|p| p.tweet_id.as_str()).collect();
    Dataset {
        records: dataset.records.iter().filter(|r| keep.contains(r.record.tweet_id.as_str())).cloned().collect(),
        source_manifest: dataset.source_manifest.clone(),
        schema_version: dataset.schema_version,
    }
}

/// One JSON object per line.
pub fn write_enrichments(path: &Path, records: &[EnrichmentRecord]) -> Result<(), EnrichmentError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| EnrichmentError::Config(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_enrichments(path: &Path) -> Result<Vec<EnrichmentRecord>, EnrichmentError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EnrichmentError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}
