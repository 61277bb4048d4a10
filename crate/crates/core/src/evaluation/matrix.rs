use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{confusion, metrics, ConfusionCounts, MetricSet};
use crate::corpus::{split_dataset, BinaryLabel, CorpusError, Dataset};
use crate::features::{assemble_fusion, FeatureBundle, FusionDims, ImageEncoder, Modality, SocialVectorSchema, TextEncoder};
use crate::models::{train, BackendFactory, BackendRegistry, ExperimentSpec, ModelError, TrainContext};
use crate::vision::RgbImage;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("no experiment specs given")]
    NoSpecs,
    #[error("no seeds given")]
    NoSeeds,
    #[error("record {0} has no prepared features")]
    MissingFeatures(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Encoder inputs for one record. `None` marks an absent modality.
#[derive(Debug, Clone)]
pub struct PreparedRecord {
    pub tweet_id: String,
    /// Cleaned text handed to the text encoder.
    pub text: Option<String>,
    pub image: Option<Arc<RgbImage>>,
    /// Raw social vector; normalization happens per training split.
    pub social: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub test_fraction: f64,
    pub seeds: Vec<u64>,
    pub dims: FusionDims,
    /// Used when a spec's combo names no encoder for a selected modality.
    pub default_text_encoder: String,
    pub default_image_encoder: String,
    pub encoder_seed: u64,
    /// Run specs on this many threads; 0 picks the available parallelism.
    pub threads: usize,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seeds: vec![42],
            dims: FusionDims { text: 768, image: 512, social: SocialVectorSchema::standard().total_dim() },
            default_text_encoder: "hash-text".into(),
            default_image_encoder: "histogram".into(),
            encoder_seed: 7,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec_name: String,
    pub modalities: Vec<Modality>,
    pub backend_combo: Vec<String>,
    pub metrics: MetricSet,
    pub confusion: ConfusionCounts,
    pub seed: u64,
    pub split_fingerprint: String,
    pub wallclock: Duration,
}

impl ExperimentResult {
    pub fn modality_label(&self) -> String {
        let mut m = self.modalities.clone();
        m.sort();
        m.iter().map(|m| m.title()).collect::<Vec<_>>().join("+")
    }

    pub fn model_label(&self) -> String {
        self.backend_combo.join("+")
    }
}

#[derive(Debug, Clone)]
pub struct MatrixEntry {
    pub spec_name: String,
    pub seed: u64,
    pub outcome: Result<ExperimentResult, String>,
}

/// Entries in spec order within each seed, seeds in the configured order.
#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub entries: Vec<MatrixEntry>,
    /// `(seed, fingerprint of the test split)`.
    pub split_fingerprints: Vec<(u64, String)>,
}

impl MatrixRun {
    pub fn results(&self) -> Vec<ExperimentResult> {
        self.entries.iter().filter_map(|e| e.outcome.as_ref().ok().cloned()).collect()
    }

    pub fn failures(&self) -> Vec<(&str, u64, &str)> {
        self.entries.iter().filter_map(|e| e.outcome.as_ref().err().map(|r| (e.spec_name.as_str(), e.seed, r.as_str()))).collect()
    }
}

/// The 6 unimodal, 5 bimodal and 4 trimodal specs.
pub fn default_matrix() -> Vec<ExperimentSpec> {
    use Modality::{Image as I, Social as S, Text as T};
    let rows: [(&str, &[Modality], &[&str]); 15] = [
        ("text-linear", &[T], &["hash-text", "linear"]),
        ("text-mlp", &[T], &["hash-text", "mlp"]),
        ("image-linear", &[I], &["histogram", "linear"]),
        ("image-mlp", &[I], &["histogram", "mlp"]),
        ("social-linear", &[S], &["linear"]),
        ("social-mlp", &[S], &["mlp"]),
        ("image-social-linear", &[I, S], &["histogram", "linear"]),
        ("text-social-linear", &[T, S], &["hash-text", "linear"]),
        ("text-image-linear", &[T, I], &["hash-text", "histogram", "linear"]),
        ("text-image-mlp", &[T, I], &["hash-text", "histogram", "mlp"]),
        ("text-image-ngram-meanpixel-linear", &[T, I], &["hash-ngram", "mean-pixel", "linear"]),
        ("trimodal-linear", &[T, I, S], &["hash-text", "histogram", "linear"]),
        ("trimodal-mlp", &[T, I, S], &["hash-text", "histogram", "mlp"]),
        ("trimodal-ngram-linear", &[T, I, S], &["hash-ngram", "histogram", "linear"]),
        ("trimodal-meanpixel-linear", &[T, I, S], &["hash-text", "mean-pixel", "linear"]),
    ];
    rows.iter().map(|(n, m, c)| ExperimentSpec::new(n, m, c)).collect()
}

type EncodedColumn = Arc<Vec<Option<Vec<f64>>>>;

/// Encodes lazily, once per encoder name.
struct EncodingCache<'a> {
    prepared: &'a [PreparedRecord],
    registry: &'a BackendRegistry,
    config: &'a MatrixConfig,
    text: HashMap<String, Result<EncodedColumn, String>>,
    image: HashMap<String, Result<EncodedColumn, String>>,
}

impl<'a> EncodingCache<'a> {
    fn text(&mut self, name: &str) -> Result<EncodedColumn, String> {
        if let Some(c) = self.text.get(name) {
            return c.clone();
        }
        let built = match self.registry.resolve(name) {
            Ok(BackendFactory::TextEncoder(f)) => Ok(f(self.config.dims.text, self.config.encoder_seed)),
            Ok(other) => Err(format!("{name} is a {}, not a text encoder", other.kind())),
            Err(e) => Err(e.to_string()),
        };
        let col = built.map(|enc: Arc<dyn TextEncoder>| {
            Arc::new(
                self.prepared
                    .iter()
                    .map(|p| {
                        let t = p.text.as_ref()?;
                        check(enc.encode(t), enc.dim(), &p.tweet_id, name)
                    })
                    .collect(),
            )
        });
        self.text.insert(name.to_string(), col.clone());
        col
    }

    fn image(&mut self, name: &str) -> Result<EncodedColumn, String> {
        if let Some(c) = self.image.get(name) {
            return c.clone();
        }
        let built = match self.registry.resolve(name) {
            Ok(BackendFactory::ImageEncoder(f)) => Ok(f(self.config.dims.image, self.config.encoder_seed)),
            Ok(other) => Err(format!("{name} is a {}, not an image encoder", other.kind())),
            Err(e) => Err(e.to_string()),
        };
        let col = built.map(|enc: Arc<dyn ImageEncoder>| {
            Arc::new(
                self.prepared
                    .iter()
                    .map(|p| {
                        let img = p.image.as_ref()?;
                        check(enc.encode(img), enc.dim(), &p.tweet_id, name)
                    })
                    .collect(),
            )
        });
        self.image.insert(name.to_string(), col.clone());
        col
    }
}

/// A failed or malformed encoding degrades to an absent modality.
fn check(r: Result<Vec<f64>, crate::features::EncoderError>, dim: usize, id: &str, name: &str) -> Option<Vec<f64>> {
    match r {
        Ok(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Some(v),
        Ok(v) => {
            warn!("{name}: bad output for {id} (length {}), treating as absent", v.len());
            None
        }
        Err(e) => {
            warn!("{name}: {e} for {id}, treating as absent");
            None
        }
    }
}

/// Everything one spec needs to train and evaluate, resolved up front.
struct Job {
    spec: ExperimentSpec,
    bundles: Result<Vec<FeatureBundle>, String>,
}

fn build_bundles(
    spec: &ExperimentSpec,
    cache: &mut EncodingCache<'_>,
    registry: &BackendRegistry,
    config: &MatrixConfig,
) -> Result<Vec<FeatureBundle>, String> {
    let combo = registry.resolve_combo(spec).map_err(|e| e.to_string())?;
    let uses = |m: Modality| spec.modalities.contains(&m);
    let text = if uses(Modality::Text) {
        let name = combo.text_encoder.as_ref().map_or(config.default_text_encoder.as_str(), |(n, _)| n.as_str());
        Some(cache.text(name)?)
    } else {
        None
    };
    let image = if uses(Modality::Image) {
        let name = combo.image_encoder.as_ref().map_or(config.default_image_encoder.as_str(), |(n, _)| n.as_str());
        Some(cache.image(name)?)
    } else {
        None
    };
    cache
        .prepared
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = text.as_ref().and_then(|c| c[i].clone());
            let im = image.as_ref().and_then(|c| c[i].clone());
            let s = if uses(Modality::Social) { p.social.clone() } else { None };
            assemble_fusion(&p.tweet_id, t, im, s, config.dims).map_err(|e| e.to_string())
        })
        .collect()
}

fn evaluate(
    spec: &ExperimentSpec,
    bundles: &[FeatureBundle],
    train_idx: &[usize],
    test_idx: &[usize],
    labels: &[BinaryLabel],
    ctx: TrainContext<'_>,
) -> Result<(MetricSet, ConfusionCounts), ModelError> {
    let train_set: Vec<(FeatureBundle, BinaryLabel)> = train_idx.iter().map(|&i| (bundles[i].clone(), labels[i])).collect();
    let model = train(spec, &train_set, ctx)?;
    let mut truth = Vec::with_capacity(test_idx.len());
    let mut preds = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        truth.push(labels[i]);
        preds.push(model.predict(&bundles[i])?.1);
    }
    let c = confusion(&truth, &preds).map_err(|e| ModelError::InsufficientData(e.to_string()))?;
    let m = metrics(&c).map_err(|e| ModelError::InsufficientData(e.to_string()))?;
    Ok((m, c))
}

/// Runs every spec under every seed. Each seed draws one stratified split
/// shared by all specs; a failing spec is recorded and the rest continue.
pub fn run_experiment_matrix(
    specs: &[ExperimentSpec],
    dataset: &Dataset,
    prepared: &[PreparedRecord],
    config: &MatrixConfig,
    registry: &BackendRegistry,
) -> Result<MatrixRun, MatrixError> {
    if specs.is_empty() {
        return Err(MatrixError::NoSpecs);
    }
    if config.seeds.is_empty() {
        return Err(MatrixError::NoSeeds);
    }
    let by_id: HashMap<&str, usize> = prepared.iter().enumerate().map(|(i, p)| (p.tweet_id.as_str(), i)).collect();
    let mut order = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        let i = by_id.get(r.record.tweet_id.as_str()).ok_or_else(|| MatrixError::MissingFeatures(r.record.tweet_id.clone()))?;
        order.push(*i);
    }
    let aligned: Vec<PreparedRecord> = order.iter().map(|&i| prepared[i].clone()).collect();
    let labels: Vec<BinaryLabel> = dataset.records.iter().map(|r| r.label).collect();
    let position: HashMap<&str, usize> = dataset.records.iter().enumerate().map(|(i, r)| (r.record.tweet_id.as_str(), i)).collect();

    let mut cache = EncodingCache { prepared: &aligned, registry, config, text: HashMap::new(), image: HashMap::new() };
    let jobs: Vec<Job> = specs
        .iter()
        .map(|s| Job {
            spec: s.clone(),
            bundles: s.validate().map_err(|e| e.to_string()).and_then(|_| build_bundles(s, &mut cache, registry, config)),
        })
        .collect();
    drop(cache);

    let schema = SocialVectorSchema::standard();
    let ctx = TrainContext { dims: config.dims, schema: &schema, registry };
    let threads = match config.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };

    let mut entries = Vec::with_capacity(specs.len() * config.seeds.len());
    let mut split_fingerprints = Vec::new();
    for &seed in &config.seeds {
        let (train_ds, test_ds) = split_dataset(dataset, config.test_fraction, seed)?;
        let fingerprint = test_ds.fingerprint();
        split_fingerprints.push((seed, fingerprint.clone()));
        let idx = |d: &Dataset| d.records.iter().map(|r| position[r.record.tweet_id.as_str()]).collect::<Vec<_>>();
        let (train_idx, test_idx) = (idx(&train_ds), idx(&test_ds));

        let run_one = |job: &Job| -> MatrixEntry {
            let started = Instant::now();
            let mut spec = job.spec.clone();
            spec.seed = spec.seed.wrapping_add(seed);
            let outcome = job.bundles.clone().and_then(|bundles| {
                evaluate(&spec, &bundles, &train_idx, &test_idx, &labels, ctx)
                    .map(|(metrics, confusion)| ExperimentResult {
                        spec_name: job.spec.name.clone(),
                        modalities: job.spec.modalities.clone(),
                        backend_combo: job.spec.backend_combo.clone(),
                        metrics,
                        confusion,
                        seed,
                        split_fingerprint: fingerprint.clone(),
                        wallclock: started.elapsed(),
                    })
                    .map_err(|e| e.to_string())
            });
            if let Err(e) = &outcome {
                warn!("experiment {} (seed {seed}) failed: {e}", job.spec.name);
            }
            MatrixEntry { spec_name: job.spec.name.clone(), seed, outcome }
        };

        let mut slots: Vec<Option<MatrixEntry>> = vec![None; jobs.len()];
        if threads <= 1 || jobs.len() == 1 {
            for (slot, job) in slots.iter_mut().zip(&jobs) {
                *slot = Some(run_one(job));
            }
        } else {
            let next = std::sync::atomic::AtomicUsize::new(0);
            let done = std::sync::Mutex::new(&mut slots);
            std::thread::scope(|s| {
                for _ in 0..threads.min(jobs.len()) {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= jobs.len() {
                            break;
                        }
                        let e = run_one(&jobs[i]);
                        done.lock().expect("no panics while holding the lock")[i] = Some(e);
                    });
                }
            });
        }
        entries.extend(slots.into_iter().map(|e| e.expect("every job ran")));
    }
    Ok(MatrixRun { entries, split_fingerprints })
}

/// Mean and range of each metric over the seeds one spec ran with.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub spec_name: String,
    pub modalities: Vec<Modality>,
    pub backend_combo: Vec<String>,
    pub seeds: Vec<u64>,
    pub mean: MetricSet,
    pub min: MetricSet,
    pub max: MetricSet,
}

pub fn summarize_seeds(results: &[ExperimentResult]) -> Vec<SeedSummary> {
    let mut groups: BTreeMap<usize, Vec<&ExperimentResult>> = BTreeMap::new();
    let mut first_seen: Vec<&str> = Vec::new();
    for r in results {
        let k = match first_seen.iter().position(|n| *n == r.spec_name) {
            Some(k) => k,
            None => {
                first_seen.push(&r.spec_name);
                first_seen.len() - 1
            }
        };
        groups.entry(k).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let fold = |f: fn(&MetricSet) -> f64| {
                let vals: Vec<f64> = rs.iter().map(|r| f(&r.metrics)).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mean, min, max)
            };
            let a = fold(|m| m.accuracy);
            let p = fold(|m| m.precision);
            let r = fold(|m| m.recall);
            let f = fold(|m| m.f1);
            let set = |pick: fn((f64, f64, f64)) -> f64| MetricSet {
                accuracy: pick(a),
                precision: pick(p),
                recall: pick(r),
                f1: pick(f),
                averaging: rs[0].metrics.averaging,
            };
            SeedSummary {
                spec_name: rs[0].spec_name.clone(),
                modalities: rs[0].modalities.clone(),
                backend_combo: rs[0].backend_combo.clone(),
                seeds: rs.iter().map(|r| r.seed).collect(),
                mean: set(|t| t.0),
                min: set(|t| t.1),
                max: set(|t| t.2),
            }
        })
        .collect()
}
