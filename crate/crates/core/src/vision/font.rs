//! A 5x7 bitmap font, a text renderer, and an OCR engine that reads text
//! drawn with that font back out of an image.
//!
//! Every glyph touches the top and bottom rows of its cell and has a
//! contiguous column footprint, so a rendered line can be segmented into
//! glyphs by looking for blank columns alone. Glyphs sit in 6-unit cells
//! (5 ink columns plus one spacing column); a space is one empty cell.

use super::{EngineFailure, OcrEngine, RgbImage};

pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;
const CELL: usize = GLYPH_WIDTH + 1;
const LINE_GAP: usize = 2;
const MARGIN: usize = 2;

#[rustfmt::skip]
const GLYPHS: &[(char, [&str; GLYPH_HEIGHT])] = &[
    ('A', [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."]),
    ('E', ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('!', ["..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."]),
];

/// Characters the renderer and the bitmap OCR engine support (plus space and newline).
pub fn alphabet() -> impl Iterator<Item = char> {
    GLYPHS.iter().map(|(c, _)| *c)
}

fn glyph(c: char) -> Option<&'static [&'static str; GLYPH_HEIGHT]> {
    GLYPHS.iter().find(|(g, _)| *g == c).map(|(_, rows)| rows)
}

fn ink(rows: &[&str; GLYPH_HEIGHT], row: usize, col: usize) -> bool {
    rows[row].as_bytes()[col] == b'#'
}

/// Ink-column span `(first, last)` of a glyph within its 5-column cell.
fn ink_span(rows: &[&str; GLYPH_HEIGHT]) -> (usize, usize) {
    let cols: Vec<usize> = (0..GLYPH_WIDTH).filter(|&c| (0..GLYPH_HEIGHT).any(|r| ink(rows, r, c))).collect();
    (cols[0], *cols.last().unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("character {0:?} is not in the bitmap font")]
pub struct UnsupportedChar(pub char);

/// Draws `text` (lower-case letters are drawn upper-case) with its top-left
/// corner at `(x, y)`, each font unit `scale` pixels wide. Pixels falling
/// outside the image are clipped.
pub fn draw_text(img: &mut RgbImage, x: usize, y: usize, text: &str, scale: usize, color: [u8; 3]) -> Result<(), UnsupportedChar> {
    let scale = scale.max(1);
    for (line_no, line) in text.split('\n').enumerate() {
        let top = y + line_no * (GLYPH_HEIGHT + LINE_GAP) * scale;
        for (i, c) in line.chars().enumerate() {
            if c == ' ' {
                continue;
            }
            let c = c.to_ascii_uppercase();
            let rows = glyph(c).ok_or(UnsupportedChar(c))?;
            let left = x + i * CELL * scale;
            for r in 0..GLYPH_HEIGHT {
                for col in 0..GLYPH_WIDTH {
                    if !ink(rows, r, col) {
                        continue;
                    }
                    for dy in 0..scale {
                        for dx in 0..scale {
                            img.set_checked(left + col * scale + dx, top + r * scale + dy, color);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Renders black text on a white canvas sized to fit.
pub fn render_text(text: &str, scale: usize) -> Result<RgbImage, UnsupportedChar> {
    let scale = scale.max(1);
    let lines: Vec<&str> = text.split('\n').collect();
    let longest = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(1);
    let width = (2 * MARGIN + longest * CELL) * scale;
    let height = (2 * MARGIN + lines.len() * (GLYPH_HEIGHT + LINE_GAP)) * scale;
    let mut img = RgbImage::filled(width, height, [255, 255, 255]);
    draw_text(&mut img, MARGIN * scale, MARGIN * scale, text, scale, [0, 0, 0])?;
    Ok(img)
}

struct Template {
    ch: char,
    width: usize,
    lead: usize,
    trail: usize,
    bits: Vec<bool>,
}

/// OCR engine for text drawn with this module's bitmap font at any integer scale.
pub struct BitmapFontOcr {
    templates: Vec<Template>,
    /// Binarization cut on 0..=255 luminance; darker pixels are ink.
    pub threshold: u8,
}

impl Default for BitmapFontOcr {
    fn default() -> Self {
        let templates = GLYPHS
            .iter()
            .map(|(ch, rows)| {
                let (first, last) = ink_span(rows);
                let width = last - first + 1;
                let bits = (0..GLYPH_HEIGHT).flat_map(|r| (first..=last).map(move |c| ink(rows, r, c))).collect();
                Template { ch: *ch, width, lead: first, trail: GLYPH_WIDTH - 1 - last, bits }
            })
            .collect();
        Self { templates, threshold: 128 }
    }
}

impl BitmapFontOcr {
    fn match_glyph(&self, bits: &[bool], width: usize) -> Option<&Template> {
        self.templates.iter().find(|t| t.width == width && t.bits == bits)
    }

    fn read_line(&self, ink_at: &dyn Fn(usize, usize) -> bool, top: usize, bottom: usize, img_width: usize) -> String {
        let height = bottom - top + 1;
        if !height.is_multiple_of(GLYPH_HEIGHT) {
            return String::new();
        }
        let scale = height / GLYPH_HEIGHT;
        let Some(x0) = (0..img_width).find(|&x| (top..=bottom).any(|y| ink_at(x, y))) else {
            return String::new();
        };
        let units = (img_width - x0) / scale;
        // Sample each font unit at its centre.
        let cell = |ux: usize, uy: usize| ink_at(x0 + ux * scale + scale / 2, top + uy * scale + scale / 2);
        let col_has_ink: Vec<bool> = (0..units).map(|ux| (0..GLYPH_HEIGHT).any(|uy| cell(ux, uy))).collect();

        let mut out = String::new();
        let mut prev: Option<(&Template, usize)> = None; // template, end column
        let mut ux = 0;
        while ux < units {
            if !col_has_ink[ux] {
                ux += 1;
                continue;
            }
            let start = ux;
            while ux < units && col_has_ink[ux] {
                ux += 1;
            }
            let width = ux - start;
            let bits: Vec<bool> = (0..GLYPH_HEIGHT).flat_map(|uy| (start..ux).map(move |c| (c, uy))).map(|(c, uy)| cell(c, uy)).collect();
            let Some(t) = self.match_glyph(&bits, width) else {
                prev = None;
                continue;
            };
            if let Some((p, end)) = prev {
                let gap = start - end - 1;
                let adjacent = p.trail + 1 + t.lead;
                if gap > adjacent {
                    let spaces = (gap - adjacent + CELL / 2) / CELL;
                    out.extend(std::iter::repeat_n(' ', spaces.max(1)));
                }
            } else if !out.is_empty() {
                out.push(' ');
            }
            out.push(t.ch);
            prev = Some((t, ux - 1));
        }
        out
    }
}

impl OcrEngine for BitmapFontOcr {
    fn id(&self) -> &str {
        "bitmap-font"
    }

    fn recognize(&self, img: &RgbImage) -> Result<String, EngineFailure> {
        let threshold = self.threshold as f64;
        let ink_at = |x: usize, y: usize| x < img.width() && y < img.height() && img.luminance(x, y) < threshold;
        let row_has_ink: Vec<bool> = (0..img.height()).map(|y| (0..img.width()).any(|x| ink_at(x, y))).collect();
        let mut bands = Vec::new();
        let mut y = 0;
        while y < img.height() {
            if !row_has_ink[y] {
                y += 1;
                continue;
            }
            let top = y;
            while y < img.height() && row_has_ink[y] {
                y += 1;
            }
            bands.push((top, y - 1));
        }
        // A line made only of '!' splits into two bands at the blank row above the dot.
        let mut lines = Vec::new();
        let mut i = 0;
        while i < bands.len() {
            let (top, bottom) = bands[i];
            let line = self.read_line(&ink_at, top, bottom, img.width());
            if !line.is_empty() {
                lines.push(line);
                i += 1;
                continue;
            }
            if let Some(&(_, next_bottom)) = bands.get(i + 1) {
                let merged = self.read_line(&ink_at, top, next_bottom, img.width());
                if !merged.is_empty() {
                    lines.push(merged);
                    i += 2;
                    continue;
                }
            }
            i += 1;
        }
        Ok(lines.join("\n"))
    }
}
