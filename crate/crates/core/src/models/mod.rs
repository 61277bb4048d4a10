//! Classifier backends over fusion vectors: the registry, training, prediction
//! and the model file format.

mod nn;
mod registry;

pub use nn::{class_weights, fit, positive_probability, Classifier, LinearClassifier, MlpClassifier};
pub use registry::{BackendFactory, BackendRegistry, HeadFactory, ResolvedCombo};

use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::BinaryLabel;
use crate::features::{apply_normalizer, fit_normalizer, FeatureBundle, FusionDims, Modality, Normalizer, SocialVectorSchema};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_TAG: &str = "misinfo-model";
const BLOB_MAGIC: &[u8; 4] = b"MFNN";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("backend {0:?} is already registered")]
    DuplicateName(String),
    #[error("backend {0:?} is not registered")]
    NotRegistered(String),
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("corrupt model parameters: {0}")]
    CorruptBlob(String),
    #[error("invalid experiment spec {spec:?}: {reason}")]
    InvalidSpec { spec: String, reason: String },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn default_batch_size() -> usize {
    32
}
fn default_optimizer() -> String {
    "adam".into()
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_loss() -> String {
    "categorical_cross_entropy".into()
}
fn default_epochs() -> usize {
    50
}
fn default_patience() -> Option<usize> {
    Some(5)
}
fn default_hidden_units() -> usize {
    32
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_patience")]
    pub early_stop_patience: Option<usize>,
    /// Hidden layer width for the `mlp` head.
    #[serde(default = "default_hidden_units")]
    pub hidden_units: usize,
    /// Inverse-frequency class weights in the loss.
    #[serde(default = "default_true")]
    pub class_weighting: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            batch_size: default_batch_size(),
            optimizer: default_optimizer(),
            learning_rate: default_learning_rate(),
            loss: default_loss(),
            epochs: default_epochs(),
            early_stop_patience: default_patience(),
            hidden_units: default_hidden_units(),
            class_weighting: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 || self.epochs == 0 || self.hidden_units == 0 {
            return Err("batch_size, epochs and hidden_units must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.early_stop_patience == Some(0) {
            return Err("early_stop_patience must be positive when set".into());
        }
        if self.optimizer != "adam" {
            return Err(format!("unsupported optimizer {:?}", self.optimizer));
        }
        if self.loss != "categorical_cross_entropy" {
            return Err(format!("unsupported loss {:?}", self.loss));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub modalities: Vec<Modality>,
    /// One classifier head plus at most one encoder override per selected modality.
    pub backend_combo: Vec<String>,
    #[serde(default)]
    pub hyperparams: HyperParams,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(name: &str, modalities: &[Modality], backend_combo: &[&str]) -> Self {
        Self {
            name: name.into(),
            modalities: modalities.to_vec(),
            backend_combo: backend_combo.iter().map(|s| s.to_string()).collect(),
            hyperparams: HyperParams::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |reason: String| ModelError::InvalidSpec { spec: self.name.clone(), reason };
        if self.modalities.is_empty() {
            return Err(invalid("no modalities selected".into()));
        }
        let mut seen = self.modalities.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modalities.len() {
            return Err(invalid("duplicate modality".into()));
        }
        self.hyperparams.validate().map_err(invalid)
    }

    /// Modalities in canonical order, joined with `+`.
    pub fn modality_label(&self) -> String {
        let mut m = self.modalities.clone();
        m.sort();
        m.iter().map(|m| m.title()).collect::<Vec<_>>().join("+")
    }
}

/// What training needs beyond the spec and examples.
#[derive(Clone, Copy)]
pub struct TrainContext<'a> {
    pub dims: FusionDims,
    pub schema: &'a SocialVectorSchema,
    pub registry: &'a BackendRegistry,
}

pub struct TrainedModel {
    pub spec: ExperimentSpec,
    pub head: String,
    pub dims: FusionDims,
    /// Encoded head parameters; see [`encode_blob`].
    pub parameters: Vec<u8>,
    /// Fitted on this model's training split; present when Social is selected.
    pub normalizer: Option<Normalizer>,
    pub fitted_at: DateTime<Utc>,
    pub training_history: Vec<f64>,
    classifier: Arc<dyn Classifier>,
}

impl std::fmt::Debug for TrainedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedModel")
            .field("spec", &self.spec.name)
            .field("head", &self.head)
            .field("dims", &self.dims)
            .field("epochs", &self.training_history.len())
            .finish()
    }
}

/// Layout: magic, kind (u32 length + utf8), shape (u32 count + u64s),
/// parameters (u64 count + f64s). All integers and floats little-endian.
pub fn encode_blob(model: &dyn Classifier) -> Vec<u8> {
    let kind = model.kind().as_bytes();
    let shape = model.shape();
    let params = model.params();
    let mut out = Vec::with_capacity(4 + 4 + kind.len() + 4 + 8 * shape.len() + 8 + 8 * params.len());
    out.extend_from_slice(BLOB_MAGIC);
    out.extend_from_slice(&(kind.len() as u32).to_le_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for s in &shape {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct BlobReader<'a> {
    buf: &'a [u8],
}

impl<'a> BlobReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.buf.len() < n {
            return Err(ModelError::CorruptBlob("truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Inverse of [`encode_blob`]: `(kind, shape, parameters)`.
pub fn decode_blob(blob: &[u8]) -> Result<(String, Vec<u64>, Vec<f64>), ModelError> {
    let mut r = BlobReader { buf: blob };
    if r.take(4)? != BLOB_MAGIC {
        return Err(ModelError::CorruptBlob("bad magic".into()));
    }
    let klen = r.u32()? as usize;
    let kind = String::from_utf8(r.take(klen)?.to_vec()).map_err(|_| ModelError::CorruptBlob("kind is not utf-8".into()))?;
    let ns = r.u32()? as usize;
    let shape = (0..ns).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let np = r.u64()? as usize;
    if r.buf.len() != np.saturating_mul(8) {
        return Err(ModelError::CorruptBlob(format!("expected {np} parameters, found {} bytes", r.buf.len())));
    }
    let params = r.buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((kind, shape, params))
}

/// Head input for one bundle: unselected blocks zeroed, social block normalized.
fn model_input(
    bundle: &FeatureBundle,
    modalities: &[Modality],
    dims: &FusionDims,
    normalizer: Option<&Normalizer>,
) -> Result<Vec<f64>, ModelError> {
    if bundle.fusion_vec.len() != dims.total() {
        return Err(ModelError::DimensionMismatch { got: bundle.fusion_vec.len(), expected: dims.total() });
    }
    let mut x = bundle.masked_fusion(modalities, dims);
    if let Some(n) = normalizer {
        if bundle.modality_mask.has(Modality::Social) {
            let block = dims.block(Modality::Social);
            let scaled = apply_normalizer(n, &bundle.fusion_vec[block.clone()])?;
            x[block].copy_from_slice(&scaled);
        }
    }
    Ok(x)
}

pub fn train(
    spec: &ExperimentSpec,
    train_bundles: &[(FeatureBundle, BinaryLabel)],
    ctx: TrainContext<'_>,
) -> Result<TrainedModel, ModelError> {
    spec.validate()?;
    let combo = ctx.registry.resolve_combo(spec)?;
    let dims = ctx.dims;
    for m in Modality::ALL {
        if spec.modalities.contains(&m) && dims.of(m) == 0 {
            return Err(ModelError::InvalidSpec { spec: spec.name.clone(), reason: format!("{m} block has width 0") });
        }
    }
    let counts = train_bundles.iter().fold([0usize; 2], |mut c, (_, l)| {
        c[l.index()] += 1;
        c
    });
    if counts.iter().any(|&c| c < 2) {
        return Err(ModelError::InsufficientData(format!(
            "need at least 2 examples per class, got {} misinformation / {} other",
            counts[BinaryLabel::Misinformation.index()],
            counts[BinaryLabel::Other.index()]
        )));
    }
    let carries_selected = |b: &FeatureBundle| spec.modalities.iter().any(|m| b.modality_mask.0[m.index()]);
    if !train_bundles.iter().any(|(b, _)| carries_selected(b)) {
        return Err(ModelError::InsufficientData(format!("no training example carries {}", spec.modality_label())));
    }

    let normalizer = if spec.modalities.contains(&Modality::Social) {
        if ctx.schema.total_dim() != dims.social {
            return Err(ModelError::DimensionMismatch { got: dims.social, expected: ctx.schema.total_dim() });
        }
        let raw: Vec<Vec<f64>> = train_bundles
            .iter()
            .filter(|(b, _)| b.modality_mask.has(Modality::Social))
            .map(|(b, _)| b.fusion_vec.get(dims.block(Modality::Social)).map(<[f64]>::to_vec).unwrap_or_default())
            .collect();
        if raw.is_empty() {
            return Err(ModelError::InsufficientData("no training record carries social features".into()));
        }
        Some(fit_normalizer(&raw, ctx.schema)?)
    } else {
        None
    };

    let x =
        train_bundles.iter().map(|(b, _)| model_input(b, &spec.modalities, &dims, normalizer.as_ref())).collect::<Result<Vec<_>, _>>()?;
    let y: Vec<usize> = train_bundles.iter().map(|(_, l)| l.index()).collect();

    let mut head = (combo.head.build)(dims.total(), &spec.hyperparams, spec.seed);
    let training_history = fit(head.as_mut(), &x, &y, &spec.hyperparams, spec.seed)?;
    Ok(TrainedModel {
        spec: spec.clone(),
        head: combo.head_name,
        dims,
        parameters: encode_blob(head.as_ref()),
        normalizer,
        fitted_at: Utc::now(),
        training_history,
        classifier: Arc::from(head),
    })
}

impl TrainedModel {
    /// Misinformation probability and label; the 0.5 boundary goes to Misinformation.
    pub fn predict(&self, bundle: &FeatureBundle) -> Result<(f64, BinaryLabel), ModelError> {
        let x = model_input(bundle, &self.spec.modalities, &self.dims, self.normalizer.as_ref())?;
        let p = positive_probability(self.classifier.forward(&x));
        Ok((p, label_for(p)))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile {
            format: MODEL_FORMAT_TAG.into(),
            schema_version: MODEL_FORMAT_VERSION,
            seed: self.spec.seed,
            fitted_at: self.fitted_at,
            spec: self.spec.clone(),
            head: self.head.clone(),
            dims: self.dims,
            normalizer: self.normalizer.clone(),
            training_history: self.training_history.clone(),
            parameters: hex::encode(&self.parameters),
        };
        let json = serde_json::to_string_pretty(&file).map_err(|e| ModelError::Format(e.to_string()))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path, registry: &BackendRegistry) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT_TAG || file.schema_version > MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported model file {} v{}", file.format, file.schema_version)));
        }
        let parameters = hex::decode(&file.parameters).map_err(|e| ModelError::CorruptBlob(e.to_string()))?;
        let (kind, shape, params) = decode_blob(&parameters)?;
        let head = match registry.resolve(&file.head)? {
            BackendFactory::Head(h) => h.clone(),
            other => return Err(ModelError::Format(format!("{} is a {}, not a head", file.head, other.kind()))),
        };
        let classifier = (head.restore)(&shape, params)?;
        if classifier.kind() != kind || classifier.input_dim() != file.dims.total() {
            return Err(ModelError::CorruptBlob(format!("blob holds a {kind} head that does not match the header")));
        }
        Ok(Self {
            spec: file.spec,
            head: file.head,
            dims: file.dims,
            parameters,
            normalizer: file.normalizer,
            fitted_at: file.fitted_at,
            training_history: file.training_history,
            classifier: Arc::from(classifier),
        })
    }
}

pub fn label_for(probability: f64) -> BinaryLabel {
    if probability >= 0.5 {
        BinaryLabel::Misinformation
    } else {
        BinaryLabel::Other
    }
}

pub fn predict(model: &TrainedModel, bundle: &FeatureBundle) -> Result<(f64, BinaryLabel), ModelError> {
    model.predict(bundle)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    schema_version: u32,
    seed: u64,
    fitted_at: DateTime<Utc>,
    spec: ExperimentSpec,
    head: String,
    dims: FusionDims,
    normalizer: Option<Normalizer>,
    training_history: Vec<f64>,
    parameters: String,
}
