//! Per-modality encoding, social normalization and early-fusion assembly.
//!
//! A fusion vector is always `[text | image | social]` with each block at its
//! configured width. A missing modality contributes a zero block and a false
//! mask bit, so every record of a run has the same fusion length.

mod encoders;
mod social;
mod store;

pub use encoders::{
    cosine, encode_image, encode_text, fnv1a64, splitmix64, EncoderError, EncoderHandle, EncoderModality, HashTextEncoder, ImageEncoder,
    ImageStatistic, ProjectedImageEncoder, TextEncoder,
};
pub use social::{
    apply_normalizer, build_social_vector, fit_normalizer, FieldKind, Normalizer, SlotScale, SocialField, SocialVectorSchema,
    SOCIAL_SCHEMA_VERSION,
};
pub use store::{read_feature_store, write_feature_store, FeatureStoreHeader, StoredFeatures, FEATURE_STORE_VERSION};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no training vectors to fit a normalizer")]
    EmptyTraining,
    #[error("{modality} block has length {got}, configured {expected}")]
    DimensionMismatch { modality: Modality, got: usize, expected: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("feature store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Image,
    Social,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Image, Modality::Social];

    pub fn index(self) -> usize {
        match self {
            Modality::Text => 0,
            Modality::Image => 1,
            Modality::Social => 2,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Modality::Text => "Text",
            Modality::Image => "Image",
            Modality::Social => "Social",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

/// Configured block widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionDims {
    pub text: usize,
    pub image: usize,
    pub social: usize,
}

impl FusionDims {
    pub fn total(&self) -> usize {
        self.text + self.image + self.social
    }

    pub fn of(&self, m: Modality) -> usize {
        match m {
            Modality::Text => self.text,
            Modality::Image => self.image,
            Modality::Social => self.social,
        }
    }

    /// Half-open slot range of a block inside the fusion vector.
    pub fn block(&self, m: Modality) -> std::ops::Range<usize> {
        match m {
            Modality::Text => 0..self.text,
            Modality::Image => self.text..self.text + self.image,
            Modality::Social => self.text + self.image..self.total(),
        }
    }
}

/// Which modalities were present, in `[text, image, social]` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModalityMask(pub [bool; 3]);

impl ModalityMask {
    pub fn has(&self, m: Modality) -> bool {
        self.0[m.index()]
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub tweet_id: String,
    pub text_vec: Option<Vec<f64>>,
    pub image_vec: Option<Vec<f64>>,
    pub social_vec: Option<Vec<f64>>,
    pub modality_mask: ModalityMask,
    pub fusion_vec: Vec<f64>,
}

impl FeatureBundle {
    /// Fusion vector with the blocks of unselected modalities zeroed.
    pub fn masked_fusion(&self, selected: &[Modality], dims: &FusionDims) -> Vec<f64> {
        let mut v = self.fusion_vec.clone();
        for m in Modality::ALL {
            if !selected.contains(&m) {
                v[dims.block(m)].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        v
    }
}

/// Concatenates `[text | image | social]`, zero-filling absent blocks.
pub fn assemble_fusion(
    tweet_id: &str,
    text_vec: Option<Vec<f64>>,
    image_vec: Option<Vec<f64>>,
    social_vec: Option<Vec<f64>>,
    dims: FusionDims,
) -> Result<FeatureBundle, FeatureError> {
    let mut fusion_vec = Vec::with_capacity(dims.total());
    for (m, v) in [(Modality::Text, &text_vec), (Modality::Image, &image_vec), (Modality::Social, &social_vec)] {
        let want = dims.of(m);
        match v {
            Some(v) if v.len() != want => return Err(FeatureError::DimensionMismatch { modality: m, got: v.len(), expected: want }),
            Some(v) => fusion_vec.extend_from_slice(v),
            None => fusion_vec.extend(std::iter::repeat_n(0.0, want)),
        }
    }
    let modality_mask = ModalityMask([text_vec.is_some(), image_vec.is_some(), social_vec.is_some()]);
    Ok(FeatureBundle { tweet_id: tweet_id.to_string(), text_vec, image_vec, social_vec, modality_mask, fusion_vec })
}
