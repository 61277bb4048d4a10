//! Multimodal misinformation detection with early fusion of text, image and
//! social features.
//!
//! The pipeline runs in stages: [`corpus`] loads and labels tweet records,
//! [`enrichment`], [`vision`] and [`textprep`] derive extra features,
//! [`features`] encodes and fuses them, [`models`] trains classifiers over
//! the fused vectors, [`evaluation`] runs the modality/backend matrix, and
//! [`propagation`] summarizes how each class spreads.

pub mod corpus;
pub mod enrichment;
pub mod evaluation;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod propagation;
pub mod synth;
pub mod textprep;
pub mod vision;

#[cfg(test)]
pub(crate) mod testutil;
