//! Encoder adapter traits and the bundled deterministic encoders.
//!
//! Bundled text encoders hash each token into a pseudo-random direction and
//! mean-pool. For token `t`, seed `s` and output index `j`:
//!
//! ```text
//! base   = fnv1a64(t) ^ s
//! v[j]   = unit(splitmix64(base + (j + 1) * 0x9E3779B97F4A7C15))
//! unit(x) = (x >> 11) / 2^53 * 2 - 1        // in [-1, 1)
//! ```
//!
//! Bundled image encoders reduce the image to a small statistic (per-channel
//! intensity-weighted histogram, or the mean pixel) and project it with a
//! fixed matrix drawn the same way, so an all-black image maps to zero.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vision::RgbImage;

#[derive(Debug, Clone, Error)]
pub enum EncoderError {
    #[error("encoder failure: {0}")]
    Failed(String),
    #[error("encoder {name} handles {actual:?} input, not {expected:?}")]
    WrongModality { name: String, expected: EncoderModality, actual: EncoderModality },
    #[error("encoder {name} produced {got} values, expected {expected}")]
    BadOutput { name: String, got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderModality {
    Text,
    Image,
}

pub trait TextEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f64>, EncoderError>;
}

pub trait ImageEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn encode(&self, img: &RgbImage) -> Result<Vec<f64>, EncoderError>;
}

/// A named encoder for one modality with a fixed output width.
#[derive(Clone)]
pub enum EncoderHandle {
    Text(Arc<dyn TextEncoder>),
    Image(Arc<dyn ImageEncoder>),
}

impl fmt::Debug for EncoderHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EncoderHandle({:?}, {}, dim {})", self.modality(), self.name(), self.output_dim())
    }
}

impl EncoderHandle {
    pub fn name(&self) -> &str {
        match self {
            EncoderHandle::Text(e) => e.name(),
            EncoderHandle::Image(e) => e.name(),
        }
    }

    pub fn modality(&self) -> EncoderModality {
        match self {
            EncoderHandle::Text(_) => EncoderModality::Text,
            EncoderHandle::Image(_) => EncoderModality::Image,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            EncoderHandle::Text(e) => e.dim(),
            EncoderHandle::Image(e) => e.dim(),
        }
    }
}

fn check_len(name: &str, v: Vec<f64>, expected: usize) -> Result<Vec<f64>, EncoderError> {
    if v.len() != expected || v.iter().any(|x| !x.is_finite()) {
        return Err(EncoderError::BadOutput { name: name.to_string(), got: v.len(), expected });
    }
    Ok(v)
}

pub fn encode_text(cleaned_text: &str, enc: &EncoderHandle) -> Result<Vec<f64>, EncoderError> {
    match enc {
        EncoderHandle::Text(e) => check_len(e.name(), e.encode(cleaned_text)?, e.dim()),
        EncoderHandle::Image(e) => {
            Err(EncoderError::WrongModality { name: e.name().to_string(), expected: EncoderModality::Text, actual: EncoderModality::Image })
        }
    }
}

pub fn encode_image(img: &RgbImage, enc: &EncoderHandle) -> Result<Vec<f64>, EncoderError> {
    match enc {
        EncoderHandle::Image(e) => check_len(e.name(), e.encode(img)?, e.dim()),
        EncoderHandle::Text(e) => {
            Err(EncoderError::WrongModality { name: e.name().to_string(), expected: EncoderModality::Image, actual: EncoderModality::Text })
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Coordinate `j` of the pseudo-random direction for `base`.
fn coord(base: u64, j: usize) -> f64 {
    unit(splitmix64(base.wrapping_add((j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))))
}

/// Seeded hash projection with mean pooling over whitespace tokens
/// (`ngram = 2` adds `a_b` bigram tokens). Empty text maps to zeros.
pub struct HashTextEncoder {
    name: String,
    dim: usize,
    seed: u64,
    ngram: usize,
}

impl HashTextEncoder {
    pub fn new(name: &str, dim: usize, seed: u64, ngram: usize) -> Self {
        Self { name: name.to_string(), dim: dim.max(1), seed, ngram: ngram.clamp(1, 2) }
    }

    pub fn unigram(dim: usize, seed: u64) -> Self {
        Self::new("hash-text", dim, seed, 1)
    }

    pub fn bigram(dim: usize, seed: u64) -> Self {
        Self::new("hash-ngram", dim, seed, 2)
    }

    fn add_token(&self, acc: &mut [f64], token: &str, memo: &mut HashMap<u64, Vec<f64>>) {
        let base = fnv1a64(token.as_bytes()) ^ self.seed;
        let v = memo.entry(base).or_insert_with(|| (0..self.dim).map(|j| coord(base, j)).collect());
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
}

impl TextEncoder for HashTextEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, EncoderError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let mut acc = vec![0.0; self.dim];
        let mut memo = HashMap::new();
        let mut n = 0usize;
        for t in &tokens {
            self.add_token(&mut acc, t, &mut memo);
            n += 1;
        }
        if self.ngram >= 2 {
            for w in tokens.windows(2) {
                self.add_token(&mut acc, &format!("{}_{}", w[0], w[1]), &mut memo);
                n += 1;
            }
        }
        if n > 0 {
            acc.iter_mut().for_each(|a| *a /= n as f64);
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageStatistic {
    /// Per-channel histogram with `bins` bins, each bin holding the summed
    /// `value / 255` of the pixels falling in it, divided by the pixel count.
    ChannelHistogram { bins: usize },
    /// Mean `value / 255` per channel.
    MeanPixel,
}

/// Fixed random projection of an image statistic.
pub struct ProjectedImageEncoder {
    name: String,
    dim: usize,
    statistic: ImageStatistic,
    projection: Vec<Vec<f64>>,
}

impl ProjectedImageEncoder {
    pub fn new(name: &str, dim: usize, seed: u64, statistic: ImageStatistic) -> Self {
        let dim = dim.max(1);
        let in_dim = match statistic {
            ImageStatistic::ChannelHistogram { bins } => 3 * bins.max(1),
            ImageStatistic::MeanPixel => 3,
        };
        let projection = (0..dim)
            .map(|k| {
                let base = splitmix64(seed ^ splitmix64(k as u64));
                (0..in_dim).map(|f| coord(base, f)).collect()
            })
            .collect();
        Self { name: name.to_string(), dim, statistic, projection }
    }

    pub fn histogram(dim: usize, seed: u64) -> Self {
        Self::new("histogram", dim, seed, ImageStatistic::ChannelHistogram { bins: 8 })
    }

    pub fn mean_pixel(dim: usize, seed: u64) -> Self {
        Self::new("mean-pixel", dim, seed, ImageStatistic::MeanPixel)
    }

    pub fn statistic(&self, img: &RgbImage) -> Vec<f64> {
        let n = (img.width() * img.height()) as f64;
        match self.statistic {
            ImageStatistic::ChannelHistogram { bins } => {
                let bins = bins.max(1);
                let mut f = vec![0.0; 3 * bins];
                for px in img.iter_pixels() {
                    for (c, &v) in px.iter().enumerate() {
                        let b = v as usize * bins / 256;
                        f[c * bins + b] += v as f64 / 255.0;
                    }
                }
                f.iter_mut().for_each(|x| *x /= n);
                f
            }
            ImageStatistic::MeanPixel => {
                let mut f = vec![0.0; 3];
                for px in img.iter_pixels() {
                    for (c, &v) in px.iter().enumerate() {
                        f[c] += v as f64 / 255.0;
                    }
                }
                f.iter_mut().for_each(|x| *x /= n);
                f
            }
        }
    }
}

impl ImageEncoder for ProjectedImageEncoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, img: &RgbImage) -> Result<Vec<f64>, EncoderError> {
        let f = self.statistic(img);
        Ok(self.projection.iter().map(|row| row.iter().zip(&f).map(|(p, x)| p * x).sum()).collect())
    }
}

/// Cosine similarity; `None` if either vector has zero norm or lengths differ.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn text_handle(dim: usize) -> EncoderHandle {
        EncoderHandle::Text(Arc::new(HashTextEncoder::unigram(dim, 17)))
    }

    #[test]
    fn empty_text_is_zero() {
        let v = encode_text("", &text_handle(16)).unwrap();
        assert_eq!(v, vec![0.0; 16]);
    }

    #[test]
    fn deterministic() {
        let h = text_handle(16);
        assert_eq!(encode_text("vote", &h).unwrap(), encode_text("vote", &h).unwrap());
        let h2 = text_handle(16);
        assert_eq!(encode_text("vote early", &h).unwrap(), encode_text("vote early", &h2).unwrap());
    }

    /// Recomputes the documented projection from scratch: FNV-1a, then SplitMix64 per coordinate.
    fn oracle_token(token: &str, seed: u64, dim: usize) -> Vec<f64> {
        let mut h: u64 = 14695981039346656037;
        for b in token.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(1099511628211);
        }
        let base = h ^ seed;
        (0..dim)
            .map(|j| {
                let mut z = base.wrapping_add((j as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15)).wrapping_add(0x9E3779B97F4A7C15);
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
                z ^= z >> 31;
                (z >> 11) as f64 * 2f64.powi(-53) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn hash_projection_matches_oracle() {
        let got = encode_text("vote", &text_handle(16)).unwrap();
        assert_eq!(got, oracle_token("vote", 17, 16));
        let got = encode_text("vote early", &text_handle(8)).unwrap();
        let a = oracle_token("vote", 17, 8);
        let b = oracle_token("early", 17, 8);
        for j in 0..8 {
            assert!((got[j] - (a[j] + b[j]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bigram_adds_pairs() {
        let enc = HashTextEncoder::bigram(8, 3);
        let got = enc.encode("a b").unwrap();
        let (a, b, ab) = (oracle_token("a", 3, 8), oracle_token("b", 3, 8), oracle_token("a_b", 3, 8));
        for j in 0..8 {
            assert!((got[j] - (a[j] + b[j] + ab[j]) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn image_shapes_and_black() {
        let img = RgbImage::filled(5, 3, [10, 200, 30]);
        let h = EncoderHandle::Image(Arc::new(ProjectedImageEncoder::histogram(8, 1)));
        assert_eq!(encode_image(&img, &h).unwrap().len(), 8);
        assert_eq!(encode_image(&img, &h).unwrap(), encode_image(&img.clone(), &h).unwrap());
        let m = EncoderHandle::Image(Arc::new(ProjectedImageEncoder::mean_pixel(8, 1)));
        assert_eq!(encode_image(&RgbImage::filled(1, 1, [0, 0, 0]), &m).unwrap(), vec![0.0; 8]);
        assert_eq!(encode_image(&RgbImage::filled(1, 1, [0, 0, 0]), &h).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn histogram_statistic() {
        let mut img = RgbImage::filled(2, 1, [255, 0, 0]);
        img.set(1, 0, [0, 0, 64]);
        let enc = ProjectedImageEncoder::histogram(4, 1);
        let f = enc.statistic(&img);
        assert_eq!(f.len(), 24);
        assert!((f[7] - 0.5).abs() < 1e-12); // red, bin 7
        assert!((f[16 + 2] - 64.0 / 255.0 / 2.0).abs() < 1e-12); // blue, bin 2
    }

    #[test]
    fn wrong_modality() {
        let img = RgbImage::filled(1, 1, [0, 0, 0]);
        assert!(matches!(encode_image(&img, &text_handle(4)), Err(EncoderError::WrongModality { .. })));
        let h = EncoderHandle::Image(Arc::new(ProjectedImageEncoder::histogram(8, 1)));
        assert!(matches!(encode_text("x", &h), Err(EncoderError::WrongModality { .. })));
        assert_eq!(h.modality(), EncoderModality::Image);
        assert_eq!(h.output_dim(), 8);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            k in 0.01f64..100.0,
        ) {
            if let Some(c) = cosine(&a, &b) {
                prop_assert!((c - cosine(&b, &a).unwrap()).abs() < 1e-12);
                let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
                prop_assert!((c - cosine(&scaled, &b).unwrap()).abs() < 1e-9);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
            }
        }
    }
}
