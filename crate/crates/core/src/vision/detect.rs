use super::{Detection, EngineFailure, ObjectDetector, RgbImage};

/// Hue bands in degrees, `[start, end)`; red wraps around 0.
const BANDS: &[(&str, f64, f64)] = &[
    ("red", 345.0, 15.0),
    ("orange", 15.0, 45.0),
    ("yellow", 45.0, 70.0),
    ("green", 70.0, 170.0),
    ("cyan", 170.0, 200.0),
    ("blue", 200.0, 260.0),
    ("purple", 260.0, 300.0),
    ("pink", 300.0, 345.0),
];

/// Deterministic colour-region detector: reports each named hue band that
/// covers at least `min_share` of the image, with the covered share as
/// confidence. Low-saturation and dark pixels (white, gray, black) are
/// background and never produce a label.
pub struct PaletteDetector {
    vocabulary: Vec<String>,
    pub min_share: f64,
    pub min_saturation: f64,
    pub min_value: f64,
}

impl Default for PaletteDetector {
    fn default() -> Self {
        Self { vocabulary: BANDS.iter().map(|(n, _, _)| n.to_string()).collect(), min_share: 0.05, min_saturation: 0.25, min_value: 0.2 }
    }
}

fn hue_sat_val([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (hue, sat, max)
}

fn band_of(hue: f64) -> usize {
    BANDS
        .iter()
        .position(|&(_, start, end)| if start > end { hue >= start || hue < end } else { hue >= start && hue < end })
        .expect("bands cover the hue circle")
}

impl ObjectDetector for PaletteDetector {
    fn id(&self) -> &str {
        "palette"
    }

    fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    fn detect(&self, img: &RgbImage) -> Result<Vec<Detection>, EngineFailure> {
        let mut counts = [0usize; BANDS.len()];
        let mut total = 0usize;
        for px in img.iter_pixels() {
            total += 1;
            let (h, s, v) = hue_sat_val(px);
            if s >= self.min_saturation && v >= self.min_value {
                counts[band_of(h)] += 1;
            }
        }
        Ok(counts
            .iter()
            .enumerate()
            .map(|(i, &c)| Detection { label: self.vocabulary[i].clone(), confidence: c as f64 / total as f64 })
            .filter(|d| d.confidence > 0.0 && d.confidence >= self.min_share)
            .collect())
    }
}
