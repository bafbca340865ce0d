//! Colored candidate previews for interactive selection.

use image::{DynamicImage, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::encode_png;
use crate::manifest::Manifest;
use crate::mask::{BBox, BinaryMask};

/// Fixed preview palette; candidate `i` is drawn in `PALETTE[i % 12]`.
pub const PALETTE: [[u8; 3]; 12] = [
    [255, 0, 0],
    [0, 200, 0],
    [0, 90, 255],
    [255, 200, 0],
    [255, 0, 255],
    [0, 220, 220],
    [255, 128, 0],
    [128, 0, 255],
    [0, 128, 64],
    [255, 105, 180],
    [128, 128, 0],
    [90, 60, 30],
];

pub fn palette_color(color_index: usize) -> [u8; 3] {
    PALETTE[color_index % PALETTE.len()]
}

/// Even blend of frame and palette color inside the mask, rounding halves up;
/// pixels outside the mask are copied unchanged.
pub fn render_overlay(frame: &RgbImage, mask: &BinaryMask, color_index: usize) -> Result<RgbImage> {
    if frame.dimensions() != mask.dims() {
        return Err(Error::dims(frame.dimensions(), mask.dims()));
    }
    let color = palette_color(color_index);
    let mut out = frame.clone();
    for (px, bit) in out.pixels_mut().zip(mask.bits()) {
        if bit {
            let mut blended = [0u8; 3];
            for c in 0..3 {
                blended[c] = ((u16::from(px.0[c]) + u16::from(color[c]) + 1) / 2) as u8;
            }
            *px = Rgb(blended);
        }
    }
    Ok(out)
}

/// [`render_overlay`] encoded as PNG.
pub fn overlay_png(frame: &RgbImage, mask: &BinaryMask, color_index: usize) -> Result<Vec<u8>> {
    let out = render_overlay(frame, mask, color_index)?;
    Ok(encode_png(&DynamicImage::ImageRgb8(out)))
}

/// One tile of the selection grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub index: usize,
    pub preview: String,
    pub color: [u8; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_score: Option<f64>,
}

/// Path of the overlay preview image served for `(frame, candidate)`.
pub fn preview_path(frame: usize, candidate: usize) -> String {
    format!("/api/previews/{frame}/{candidate}.png")
}

/// Grid entries for a frame, in manifest order.
pub fn candidate_grid(manifest: &Manifest, frame: usize) -> Result<Vec<GridEntry>> {
    Ok(manifest
        .frame(frame)?
        .candidates
        .iter()
        .enumerate()
        .map(|(index, c)| GridEntry {
            index,
            preview: preview_path(frame, index),
            color: palette_color(index),
            label: c.meta.label.clone(),
            area: c.meta.area,
            bbox: c.meta.bbox,
            predicted_iou: c.meta.predicted_iou,
            stability_score: c.meta.stability_score,
        })
        .collect())
}

/// `index: label` lines mirroring the console selection prompt.
pub fn label_table(manifest: &Manifest, frame: usize) -> Result<String> {
    let mut out = String::new();
    for (i, c) in manifest.frame(frame)?.candidates.iter().enumerate() {
        let label = c.meta.label.as_deref().unwrap_or("(unlabeled)");
        out.push_str(&format!("{i}: {label}\n"));
    }
    Ok(out)
}
