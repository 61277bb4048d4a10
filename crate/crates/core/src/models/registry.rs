use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::nn::{Classifier, LinearClassifier, MlpClassifier};
use super::{ExperimentSpec, HyperParams, ModelError};
use crate::features::{HashTextEncoder, ImageEncoder, Modality, ProjectedImageEncoder, TextEncoder};

type BuildHead = dyn Fn(usize, &HyperParams, u64) -> Box<dyn Classifier> + Send + Sync;
type RestoreHead = dyn Fn(&[u64], Vec<f64>) -> Result<Box<dyn Classifier>, ModelError> + Send + Sync;
type BuildText = dyn Fn(usize, u64) -> Arc<dyn TextEncoder> + Send + Sync;
type BuildImage = dyn Fn(usize, u64) -> Arc<dyn ImageEncoder> + Send + Sync;

/// Builds a classifier head over fusion vectors, or rebuilds one from saved parameters.
#[derive(Clone)]
pub struct HeadFactory {
    pub build: Arc<BuildHead>,
    pub restore: Arc<RestoreHead>,
}

/// A registry entry. Heads classify fusion vectors; encoder entries replace
/// the run's default encoder for their modality when named in a combo.
#[derive(Clone)]
pub enum BackendFactory {
    Head(HeadFactory),
    TextEncoder(Arc<BuildText>),
    ImageEncoder(Arc<BuildImage>),
}

impl BackendFactory {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendFactory::Head(_) => "head",
            BackendFactory::TextEncoder(_) => "text encoder",
            BackendFactory::ImageEncoder(_) => "image encoder",
        }
    }

    /// Identity comparison: true when both refer to the same factory closure.
    pub fn same_as(&self, other: &BackendFactory) -> bool {
        match (self, other) {
            (BackendFactory::Head(a), BackendFactory::Head(b)) => Arc::ptr_eq(&a.build, &b.build),
            (BackendFactory::TextEncoder(a), BackendFactory::TextEncoder(b)) => Arc::ptr_eq(a, b),
            (BackendFactory::ImageEncoder(a), BackendFactory::ImageEncoder(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for BackendFactory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BackendFactory({})", self.kind())
    }
}

#[derive(Clone, Default)]
pub struct BackendRegistry {
    entries: BTreeMap<String, BackendFactory>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry with the bundled heads (`linear`, `mlp`) and encoders
    /// (`hash-text`, `hash-ngram`, `histogram`, `mean-pixel`).
    pub fn with_bundled() -> Self {
        let mut r = Self::empty();
        r.register_backend("linear", linear_head()).expect("fresh registry");
        r.register_backend("mlp", mlp_head()).expect("fresh registry");
        r.register_backend(
            "hash-text",
            BackendFactory::TextEncoder(Arc::new(|dim, seed| Arc::new(HashTextEncoder::unigram(dim, seed)) as Arc<dyn TextEncoder>)),
        )
        .expect("fresh registry");
        r.register_backend(
            "hash-ngram",
            BackendFactory::TextEncoder(Arc::new(|dim, seed| Arc::new(HashTextEncoder::bigram(dim, seed)) as Arc<dyn TextEncoder>)),
        )
        .expect("fresh registry");
        r.register_backend(
            "histogram",
            BackendFactory::ImageEncoder(Arc::new(|dim, seed| {
                Arc::new(ProjectedImageEncoder::histogram(dim, seed)) as Arc<dyn ImageEncoder>
            })),
        )
        .expect("fresh registry");
        r.register_backend(
            "mean-pixel",
            BackendFactory::ImageEncoder(Arc::new(|dim, seed| {
                Arc::new(ProjectedImageEncoder::mean_pixel(dim, seed)) as Arc<dyn ImageEncoder>
            })),
        )
        .expect("fresh registry");
        r
    }

    pub fn register_backend(&mut self, name: &str, factory: BackendFactory) -> Result<(), ModelError> {
        if self.entries.contains_key(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        self.entries.insert(name.to_string(), factory);
        Ok(())
    }

    pub fn resolve(&self, name: &str) -> Result<&BackendFactory, ModelError> {
        self.entries.get(name).ok_or_else(|| ModelError::NotRegistered(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Splits a spec's backend combo into its head and optional encoder overrides.
    pub fn resolve_combo(&self, spec: &ExperimentSpec) -> Result<ResolvedCombo, ModelError> {
        let invalid = |reason: String| ModelError::InvalidSpec { spec: spec.name.clone(), reason };
        let mut head = None;
        let mut text = None;
        let mut image = None;
        for name in &spec.backend_combo {
            match self.resolve(name)? {
                BackendFactory::Head(h) => {
                    if head.replace((name.clone(), h.clone())).is_some() {
                        return Err(invalid("backend combo names more than one head".into()));
                    }
                }
                BackendFactory::TextEncoder(f) => {
                    if !spec.modalities.contains(&Modality::Text) {
                        return Err(invalid(format!("text encoder {name} without the text modality")));
                    }
                    if text.replace((name.clone(), f.clone())).is_some() {
                        return Err(invalid("backend combo names more than one text encoder".into()));
                    }
                }
                BackendFactory::ImageEncoder(f) => {
                    if !spec.modalities.contains(&Modality::Image) {
                        return Err(invalid(format!("image encoder {name} without the image modality")));
                    }
                    if image.replace((name.clone(), f.clone())).is_some() {
                        return Err(invalid("backend combo names more than one image encoder".into()));
                    }
                }
            }
        }
        let (head_name, head) = head.ok_or_else(|| invalid("backend combo names no classifier head".into()))?;
        Ok(ResolvedCombo { head_name, head, text_encoder: text, image_encoder: image })
    }
}

#[derive(Clone)]
pub struct ResolvedCombo {
    pub head_name: String,
    pub head: HeadFactory,
    pub text_encoder: Option<(String, Arc<BuildText>)>,
    pub image_encoder: Option<(String, Arc<BuildImage>)>,
}

fn linear_head() -> BackendFactory {
    BackendFactory::Head(HeadFactory {
        build: Arc::new(|dim, _hp, seed| Box::new(LinearClassifier::new(dim, seed))),
        restore: Arc::new(|shape, params| {
            let dim = *shape.first().ok_or_else(|| ModelError::CorruptBlob("linear: missing shape".into()))? as usize;
            Ok(Box::new(LinearClassifier::from_params(dim, params)?))
        }),
    })
}

fn mlp_head() -> BackendFactory {
    BackendFactory::Head(HeadFactory {
        build: Arc::new(|dim, hp, seed| Box::new(MlpClassifier::new(dim, hp.hidden_units, seed))),
        restore: Arc::new(|shape, params| match shape {
            [dim, hidden] => Ok(Box::new(MlpClassifier::from_params(*dim as usize, *hidden as usize, params)?)),
            _ => Err(ModelError::CorruptBlob("mlp: bad shape".into())),
        }),
    })
}
