//! Image loading, OCR and object detection behind adapter traits, plus the
//! object-label/caption similarity feature.

mod detect;
mod font;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

pub use detect::PaletteDetector;
pub use font::{alphabet, draw_text, render_text, BitmapFontOcr, UnsupportedChar};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{cosine, TextEncoder};

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("unreadable image {}: {reason}", path.display())]
    UnreadableImage { path: PathBuf, reason: String },
    #[error("invalid image buffer: {0}")]
    InvalidBuffer(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{engine}: {reason}")]
pub struct EngineFailure {
    pub engine: String,
    pub reason: String,
}

impl EngineFailure {
    pub fn new(engine: &str, reason: impl Into<String>) -> Self {
        Self { engine: engine.to_string(), reason: reason.into() }
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidBuffer(format!("zero dimension {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(VisionError::InvalidBuffer(format!("buffer length {} != {width}x{height}x3", pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let (width, height) = (width.max(1), height.max(1));
        Self { width, height, pixels: rgb.repeat(width * height) }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub(crate) fn set_checked(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            self.set(x, y, rgb);
        }
    }

    /// ITU-R BT.601 luma.
    pub fn luminance(&self, x: usize, y: usize) -> f64 {
        let [r, g, b] = self.get(x, y);
        0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
    }

    pub fn iter_pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn save_png(&self, path: &Path) -> Result<(), image::ImageError> {
        image::RgbImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length checked at construction")
            .save_with_format(path, image::ImageFormat::Png)
    }
}

/// Decodes any supported raster format into 3-channel RGB. Alpha is dropped
/// and grayscale is replicated across channels.
pub fn load_image(path: &Path) -> Result<RgbImage, VisionError> {
    let unreadable = |reason: String| VisionError::UnreadableImage { path: path.to_path_buf(), reason };
    let decoded = image::ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?
        .decode()
        .map_err(|e| unreadable(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(w as usize, h as usize, rgb.into_raw()).map_err(|e| unreadable(e.to_string()))
}

/// Text recognizer. Implementations must return the same text for the same pixels.
pub trait OcrEngine: Send + Sync {
    fn id(&self) -> &str;
    fn recognize(&self, img: &RgbImage) -> Result<String, EngineFailure>;
}

/// Never recognizes anything.
pub struct NoOcr;

impl OcrEngine for NoOcr {
    fn id(&self) -> &str {
        "none"
    }

    fn recognize(&self, _img: &RgbImage) -> Result<String, EngineFailure> {
        Ok(String::new())
    }
}

/// Runs an external recognizer on a temporary PNG. Arguments equal to
/// `{input}` are replaced with the image path; stdout is the recognized text.
/// For tesseract: program `tesseract`, args `["{input}", "stdout"]`.
pub struct CommandOcr {
    pub program: String,
    pub args: Vec<String>,
}

impl OcrEngine for CommandOcr {
    fn id(&self) -> &str {
        &self.program
    }

    fn recognize(&self, img: &RgbImage) -> Result<String, EngineFailure> {
        let fail = |r: String| EngineFailure::new(&self.program, r);
        let path = std::env::temp_dir().join(format!("misinfo-ocr-{}-{:?}.png", std::process::id(), std::thread::current().id()));
        img.save_png(&path).map_err(|e| fail(e.to_string()))?;
        let args: Vec<String> = self.args.iter().map(|a| if a == "{input}" { path.display().to_string() } else { a.clone() }).collect();
        let out = Command::new(&self.program).args(&args).output();
        let _ = std::fs::remove_file(&path);
        let out = out.map_err(|e| fail(e.to_string()))?;
        if !out.status.success() {
            let mut msg = Vec::new();
            let _ = write!(msg, "exit {}: ", out.status);
            msg.extend_from_slice(&out.stderr);
            return Err(fail(String::from_utf8_lossy(&msg).into_owned()));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Like [`extract_ocr_text`] but surfaces engine failures.
pub fn try_extract_ocr_text(img: &RgbImage, engine: &dyn OcrEngine) -> Result<String, EngineFailure> {
    engine.recognize(img).map(|t| normalize_whitespace(&t))
}

/// Recognized text with whitespace runs collapsed; empty when nothing is
/// found or the engine fails (failure is logged).
pub fn extract_ocr_text(img: &RgbImage, engine: &dyn OcrEngine) -> String {
    try_extract_ocr_text(img, engine).unwrap_or_else(|e| {
        warn!("OCR failed: {e}");
        String::new()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
}

pub trait ObjectDetector: Send + Sync {
    fn id(&self) -> &str;
    fn vocabulary(&self) -> &[String];
    fn detect(&self, img: &RgbImage) -> Result<Vec<Detection>, EngineFailure>;
}

/// Validates detector output against its vocabulary and the `[0, 1]`
/// confidence range, then sorts by descending confidence.
pub fn try_detect_objects(img: &RgbImage, detector: &dyn ObjectDetector) -> Result<Vec<Detection>, EngineFailure> {
    let mut found = detector.detect(img)?;
    for d in &found {
        if !(0.0..=1.0).contains(&d.confidence) {
            return Err(EngineFailure::new(detector.id(), format!("confidence {} for {:?} outside [0, 1]", d.confidence, d.label)));
        }
        if !detector.vocabulary().iter().any(|v| v == &d.label) {
            return Err(EngineFailure::new(detector.id(), format!("label {:?} not in vocabulary", d.label)));
        }
    }
    found.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.label.cmp(&b.label)));
    Ok(found)
}

/// Detections sorted by descending confidence; empty (and logged) on engine failure.
pub fn detect_objects(img: &RgbImage, detector: &dyn ObjectDetector) -> Vec<Detection> {
    try_detect_objects(img, detector).unwrap_or_else(|e| {
        warn!("object detection failed: {e}");
        Vec::new()
    })
}

/// Cosine between the mean embedding of `labels` and the embedding of
/// `caption`, both from `encoder`. `None` when either side is empty, an
/// embedding has zero norm, or the encoder fails.
pub fn object_text_similarity(labels: &[String], caption: &str, encoder: &dyn TextEncoder) -> Option<f64> {
    if labels.is_empty() || caption.trim().is_empty() {
        return None;
    }
    let mut mean = vec![0.0; encoder.dim()];
    for label in labels {
        let v = encoder.encode(label).map_err(|e| warn!("similarity: {e}")).ok()?;
        for (m, x) in mean.iter_mut().zip(&v) {
            *m += x;
        }
    }
    let n = labels.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let cap = encoder.encode(caption).map_err(|e| warn!("similarity: {e}")).ok()?;
    cosine(&mean, &cap).map(|c| c.clamp(-1.0, 1.0))
}
