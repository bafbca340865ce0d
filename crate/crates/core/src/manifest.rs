//! The version 1 candidate manifest.
//!
//! A manifest ties every foreground frame to the candidate masks a
//! segmentation model proposed for it, plus whatever metadata the model
//! reported. All paths are relative to the directory holding
//! `manifest.json`.
//!
//! ```json
//! {
//!   "version": 1,
//!   "width": 16,
//!   "height": 16,
//!   "frame_count": 1,
//!   "frames": [
//!     {
//!       "frame_index": 0,
//!       "image_path": "frames/000000.png",
//!       "candidates": [
//!         { "mask_path": "masks/000000_00.png", "label": "road", "area": 12 },
//!         { "encoding": "rle", "runs": [0, 256], "predicted_iou": 0.97 }
//!       ]
//!     }
//!   ]
//! }
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{image_dims, load_frame, load_mask_image, Frame};
use crate::mask::{BBox, BinaryMask};
use crate::rle;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE_NAME: &str = "manifest.json";

/// Model-reported metadata for one candidate. Everything is optional and
/// preserved as-is across parse and write.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_coords: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_box: Option<BBox>,
}

impl CandidateMeta {
    pub fn labeled(label: impl Into<String>) -> Self {
        Self {
            label: Some(label.into()),
            ..Self::default()
        }
    }

    /// Fills `area` and `bbox` from the mask itself.
    pub fn with_geometry(mut self, mask: &BinaryMask) -> Self {
        self.area = Some(mask.area());
        self.bbox = mask.tight_bbox();
        self
    }
}

/// Where a candidate's mask pixels live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaskSource {
    /// Single-channel image, relative to the manifest directory.
    File(PathBuf),
    /// Inline run-length encoding (see [`crate::rle`]).
    Rle(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidate", into = "RawCandidate")]
pub struct Candidate {
    pub mask: MaskSource,
    pub meta: CandidateMeta,
}

#[derive(Serialize, Deserialize)]
struct RawCandidate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoding: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    runs: Option<Vec<u64>>,
    #[serde(flatten)]
    meta: CandidateMeta,
}

impl TryFrom<RawCandidate> for Candidate {
    type Error = String;

    fn try_from(raw: RawCandidate) -> std::result::Result<Self, String> {
        let mask = match (raw.encoding.as_deref(), raw.mask_path, raw.runs) {
            (None | Some("png"), Some(path), None) => MaskSource::File(path),
            (Some("rle"), None, Some(runs)) => MaskSource::Rle(runs),
            (None | Some("png"), _, _) => {
                return Err("candidate needs exactly a \"mask_path\" (or \"encoding\": \"rle\" with \"runs\")".into())
            }
            (Some("rle"), _, _) => {
                return Err("rle candidate needs \"runs\" and no \"mask_path\"".into())
            }
            (Some(other), _, _) => return Err(format!("unknown mask encoding {other:?}")),
        };
        Ok(Candidate {
            mask,
            meta: raw.meta,
        })
    }
}

impl From<Candidate> for RawCandidate {
    fn from(c: Candidate) -> Self {
        match c.mask {
            MaskSource::File(path) => RawCandidate {
                encoding: None,
                mask_path: Some(path),
                runs: None,
                meta: c.meta,
            },
            MaskSource::Rle(runs) => RawCandidate {
                encoding: Some("rle".into()),
                mask_path: None,
                runs: Some(runs),
                meta: c.meta,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCandidates {
    pub frame_index: usize,
    pub image_path: PathBuf,
    /// Display order; a candidate's position is its selection index.
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub width: u32,
    pub height: u32,
    pub frame_count: usize,
    pub frames: Vec<FrameCandidates>,
}

impl Manifest {
    pub fn new(width: u32, height: u32, frames: Vec<FrameCandidates>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            width,
            height,
            frame_count: frames.len(),
            frames,
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Checks that need no file access: version, sizes and frame numbering.
    pub fn check_structure(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Validation(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation(format!(
                "manifest dimensions must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if self.frame_count != self.frames.len() {
            return Err(Error::Validation(format!(
                "frame_count is {} but {} frames are listed",
                self.frame_count,
                self.frames.len()
            )));
        }
        let present: BTreeSet<usize> = self.frames.iter().map(|f| f.frame_index).collect();
        if let Some(missing) = (0..self.frames.len()).find(|i| !present.contains(i)) {
            return Err(Error::Validation(format!(
                "frame indices are not contiguous: frame {missing} is missing"
            )));
        }
        if let Some((pos, f)) = self
            .frames
            .iter()
            .enumerate()
            .find(|(pos, f)| f.frame_index != *pos)
        {
            return Err(Error::Validation(format!(
                "frame {} listed at position {pos}; frames must be in index order",
                f.frame_index
            )));
        }
        Ok(())
    }

    /// Decodes one candidate mask. Paths are resolved against `root`.
    pub fn load_candidate(&self, root: &Path, frame: usize, index: usize) -> Result<BinaryMask> {
        let candidates = &self.frame(frame)?.candidates;
        let candidate = candidates.get(index).ok_or(Error::InvalidSelection {
            frame,
            index,
            count: candidates.len(),
        })?;
        let mask = match &candidate.mask {
            MaskSource::File(rel) => load_mask_image(root.join(rel))?,
            MaskSource::Rle(runs) => rle::decode(self.width, self.height, runs).map_err(|e| {
                Error::Validation(format!("frame {frame}, candidate {index}: {e}"))
            })?,
        };
        if mask.dims() != self.dims() {
            return Err(Error::Validation(format!(
                "frame {frame}, candidate {index}: mask is {}x{}, manifest is {}x{}",
                mask.width(),
                mask.height(),
                self.width,
                self.height
            )));
        }
        Ok(mask)
    }

    pub fn frame(&self, frame: usize) -> Result<&FrameCandidates> {
        self.frames.get(frame).ok_or_else(|| {
            Error::Validation(format!(
                "frame {frame} out of range ({} frames)",
                self.frames.len()
            ))
        })
    }

    /// Full validation against the files under `root`.
    pub fn validate(&self, root: &Path) -> Result<()> {
        self.check_structure()?;
        for f in &self.frames {
            let dims = image_dims(root.join(&f.image_path))?;
            if dims != self.dims() {
                return Err(Error::Validation(format!(
                    "frame {}: image {} is {}x{}, manifest is {}x{}",
                    f.frame_index,
                    f.image_path.display(),
                    dims.0,
                    dims.1,
                    self.width,
                    self.height
                )));
            }
            for (ci, c) in f.candidates.iter().enumerate() {
                let mask = self.load_candidate(root, f.frame_index, ci)?;
                check_meta(f.frame_index, ci, &c.meta, &mask)?;
            }
        }
        Ok(())
    }
}

fn check_meta(frame: usize, index: usize, meta: &CandidateMeta, mask: &BinaryMask) -> Result<()> {
    if let Some(area) = meta.area {
        let actual = mask.area();
        if area != actual {
            return Err(Error::Validation(format!(
                "frame {frame}, candidate {index}: declared area {area} but mask has {actual} pixels"
            )));
        }
    }
    if let Some(bbox) = meta.bbox {
        if Some(bbox) != mask.tight_bbox() {
            return Err(Error::Validation(format!(
                "frame {frame}, candidate {index}: declared bbox {:?} does not match mask bounds {:?}",
                [bbox.x, bbox.y, bbox.w, bbox.h],
                mask.tight_bbox().map(|b| [b.x, b.y, b.w, b.h])
            )));
        }
    }
    Ok(())
}

/// Reads and fully validates a manifest.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let manifest = read_manifest_unchecked(path)?;
    manifest.validate(&manifest_root(path))?;
    Ok(manifest)
}

/// Parses the JSON without touching referenced files.
pub fn read_manifest_unchecked(path: &Path) -> Result<Manifest> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingAsset(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Deterministic JSON: fixed key order, shortest round-trip floats, two-space indent.
pub fn manifest_to_json(m: &Manifest) -> String {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    text
}

pub fn write_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest_to_json(m)).map_err(|e| Error::io(path, e))
}

fn manifest_root(path: &Path) -> PathBuf {
    path.parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// A validated manifest together with the directory its paths resolve against.
#[derive(Debug, Clone)]
pub struct ManifestDir {
    root: PathBuf,
    path: PathBuf,
    manifest: Manifest,
}

impl ManifestDir {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let manifest = parse_manifest(&path)?;
        Ok(Self {
            root: manifest_root(&path),
            path,
            manifest,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn frame_count(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn candidate_count(&self, frame: usize) -> Result<usize> {
        Ok(self.manifest.frame(frame)?.candidates.len())
    }

    pub fn candidate_mask(&self, frame: usize, index: usize) -> Result<BinaryMask> {
        self.manifest.load_candidate(&self.root, frame, index)
    }

    pub fn candidate_masks(&self, frame: usize) -> Result<Vec<BinaryMask>> {
        (0..self.candidate_count(frame)?)
            .map(|i| self.candidate_mask(frame, i))
            .collect()
    }

    pub fn frame_image(&self, frame: usize) -> Result<Frame> {
        load_frame(self.root.join(&self.manifest.frame(frame)?.image_path))
    }
}
