//! Cutouts and per-frame compositing onto a background sequence.
//!
//! Alpha is binary throughout: a cutout pixel is either fully opaque or
//! fully transparent, and the overlay selects rather than blends.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{frame_file_name, load_frame, write_frame, Frame};
use crate::manifest::ManifestDir;
use crate::mask::{nearest_index_map, BinaryMask};
use crate::tracking::TrackingTrace;

pub const OUTPUT_MANIFEST_FILE_NAME: &str = "output_manifest.json";

/// How foreground and background sequences of different length are paired.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchPolicy {
    /// Stop at the shorter sequence.
    Truncate,
    /// Keep every foreground frame; the background wraps around.
    #[default]
    LoopBackground,
    /// Keep every foreground frame; the last background frame repeats.
    HoldLastBackground,
}

impl MismatchPolicy {
    pub fn output_len(self, n_fg: usize, n_bg: usize) -> usize {
        match self {
            MismatchPolicy::Truncate => n_fg.min(n_bg),
            MismatchPolicy::LoopBackground | MismatchPolicy::HoldLastBackground => n_fg,
        }
    }

    /// Background frame paired with output frame `t`. `n_bg` must be nonzero.
    pub fn background_index(self, t: usize, n_bg: usize) -> usize {
        match self {
            MismatchPolicy::Truncate => t,
            MismatchPolicy::LoopBackground => t % n_bg,
            MismatchPolicy::HoldLastBackground => t.min(n_bg - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompositeMode {
    /// One tracked candidate per frame.
    Tracked(TrackingTrace),
    /// Candidates picked at frame 0, unioned per frame. Labeled picks are
    /// followed by label; see [`CompositeJob::retained_indices`].
    LabelSet(BTreeSet<usize>),
}

#[derive(Debug, Clone)]
pub struct CompositeJob {
    pub foreground: ManifestDir,
    pub background: Vec<PathBuf>,
    pub mode: CompositeMode,
    pub mismatch: MismatchPolicy,
    pub output: PathBuf,
}

/// Written next to the composited frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputManifest {
    pub frame_count: usize,
    pub width: u32,
    pub height: u32,
    pub mismatch: MismatchPolicy,
    pub foreground_sha256: String,
    pub background_sha256: Vec<String>,
}

/// RGBA copy of `frame` whose alpha is 255 on the mask and 0 elsewhere.
pub fn cutout(frame: &RgbImage, mask: &BinaryMask) -> Result<RgbaImage> {
    if frame.dimensions() != mask.dims() {
        return Err(Error::dims(frame.dimensions(), mask.dims()));
    }
    let mut out = RgbaImage::new(frame.width(), frame.height());
    for ((px, bit), dst) in frame.pixels().zip(mask.bits()).zip(out.pixels_mut()) {
        let [r, g, b] = px.0;
        *dst = Rgba([r, g, b, if bit { 255 } else { 0 }]);
    }
    Ok(out)
}

/// Nearest-neighbour resize with the same index rule as [`BinaryMask::resize_nearest`].
pub fn resize_rgba_nearest(img: &RgbaImage, width: u32, height: u32) -> RgbaImage {
    if img.dimensions() == (width, height) {
        return img.clone();
    }
    let xs = nearest_index_map(img.width(), width);
    let ys = nearest_index_map(img.height(), height);
    RgbaImage::from_fn(width, height, |x, y| *img.get_pixel(xs[x as usize], ys[y as usize]))
}

/// Pastes `fg` over `background`: foreground color wherever its alpha is
/// nonzero, background elsewhere. `fg` is first resized to the background.
pub fn overlay(background: &RgbImage, fg: &RgbaImage) -> RgbImage {
    let (w, h) = background.dimensions();
    let fg = resize_rgba_nearest(fg, w, h);
    let mut out = background.clone();
    for (dst, src) in out.pixels_mut().zip(fg.pixels()) {
        let [r, g, b, a] = src.0;
        if a > 0 {
            *dst = Rgb([r, g, b]);
        }
    }
    out
}

/// OR of the listed candidates; indices past the end are skipped.
pub fn union_labels(
    candidates: &[BinaryMask],
    labels: &BTreeSet<usize>,
    width: u32,
    height: u32,
) -> Result<BinaryMask> {
    let mut out = BinaryMask::new(width, height)?;
    for &i in labels {
        if let Some(m) = candidates.get(i) {
            out = out.union(m)?;
        }
    }
    Ok(out)
}

/// Inpainting mask for the background: the complement of the object mask,
/// so every pixel that is not the object is marked 1.
pub fn background_mask_for_inpainting(mask: &BinaryMask) -> BinaryMask {
    mask.invert()
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl CompositeJob {
    fn check(&self) -> Result<()> {
        if self.background.is_empty() {
            return Err(Error::EmptyBackground);
        }
        let n_fg = self.foreground.frame_count();
        match &self.mode {
            CompositeMode::Tracked(trace) if trace.len() != n_fg => {
                Err(Error::Validation(format!(
                    "trace covers {} frames but the manifest has {n_fg}",
                    trace.len()
                )))
            }
            CompositeMode::LabelSet(labels) => {
                if n_fg == 0 {
                    return Ok(());
                }
                let count = self.foreground.candidate_count(0)?;
                match labels.iter().find(|&&i| i >= count) {
                    Some(&index) => Err(Error::InvalidSelection {
                        frame: 0,
                        index,
                        count,
                    }),
                    None => Ok(()),
                }
            }
            CompositeMode::Tracked(_) => Ok(()),
        }
    }

    /// Candidate indices of frame `t` retained in label-set mode. When every
    /// selected frame 0 candidate carries a label, later frames retain the
    /// candidates with those labels wherever they appear; otherwise the
    /// indices themselves are reused.
    pub fn retained_indices(&self, labels: &BTreeSet<usize>, t: usize) -> Result<Vec<usize>> {
        let manifest = self.foreground.manifest();
        let count = self.foreground.candidate_count(t)?;
        let first = &manifest.frame(0)?.candidates;
        let names: Option<BTreeSet<&str>> = labels
            .iter()
            .map(|&i| first.get(i).and_then(|c| c.meta.label.as_deref()))
            .collect();
        match names {
            Some(names) if !names.is_empty() => Ok(manifest.frame(t)?
                .candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.meta.label.as_deref().is_some_and(|l| names.contains(l)))
                .map(|(i, _)| i)
                .collect()),
            _ => Ok(labels.iter().copied().filter(|&i| i < count).collect()),
        }
    }

    /// Foreground mask for frame `t`, `None` when nothing is retained.
    fn mask_for(&self, t: usize) -> Result<Option<BinaryMask>> {
        match &self.mode {
            CompositeMode::Tracked(trace) => match trace.chosen(t) {
                Some(i) => self.foreground.candidate_mask(t, i).map(Some),
                None => Ok(None),
            },
            CompositeMode::LabelSet(labels) => {
                let present = self.retained_indices(labels, t)?;
                if present.is_empty() {
                    return Ok(None);
                }
                let masks: Vec<BinaryMask> = present
                    .iter()
                    .map(|&i| self.foreground.candidate_mask(t, i))
                    .collect::<Result<_>>()?;
                let all: BTreeSet<usize> = (0..masks.len()).collect();
                let (w, h) = self.foreground.manifest().dims();
                union_labels(&masks, &all, w, h).map(Some)
            }
        }
    }

    fn render(&self, t: usize) -> Result<RgbImage> {
        let bg_index = self.mismatch.background_index(t, self.background.len());
        let bg = load_frame(&self.background[bg_index])?.into_rgb();
        match self.mask_for(t)? {
            None => Ok(bg),
            Some(mask) => {
                let fg = self.foreground.frame_image(t)?.into_rgb();
                Ok(overlay(&bg, &cutout(&fg, &mask)?))
            }
        }
    }
}

/// Composites every output frame into `job.output` and returns the count.
/// Frames are rendered in parallel; the result does not depend on scheduling.
pub fn composite_sequence(job: &CompositeJob) -> Result<usize> {
    job.check()?;
    let n_out = job
        .mismatch
        .output_len(job.foreground.frame_count(), job.background.len());
    fs::create_dir_all(&job.output).map_err(|e| Error::io(&job.output, e))?;

    let dims: Vec<(u32, u32)> = (0..n_out)
        .into_par_iter()
        .map(|t| {
            let out = job.render(t)?;
            let dims = out.dimensions();
            write_frame(&Frame::Rgb(out), job.output.join(frame_file_name(t)))?;
            Ok(dims)
        })
        .collect::<Result<_>>()?;

    let (width, height) = dims.first().copied().unwrap_or((0, 0));
    let summary = OutputManifest {
        frame_count: n_out,
        width,
        height,
        mismatch: job.mismatch,
        foreground_sha256: file_sha256(job.foreground.path())?,
        background_sha256: job
            .background
            .iter()
            .map(|p| file_sha256(p))
            .collect::<Result<_>>()?,
    };
    let path = job.output.join(OUTPUT_MANIFEST_FILE_NAME);
    let mut text = serde_json::to_string_pretty(&summary).expect("output manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(n_out)
}
