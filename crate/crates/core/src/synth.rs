//! Small synthetic scenes with known answers, for tests, benchmarks and
//! trying the pipeline without a segmentation model.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::io::{frame_file_name, write_frame, write_mask_image, Frame};
use crate::manifest::{
    write_manifest, Candidate, CandidateMeta, FrameCandidates, Manifest, MaskSource,
    MANIFEST_FILE_NAME,
};
use crate::mask::BinaryMask;

/// Candidate masks per frame plus the index of the true object in each frame
/// (`None` where the object is absent).
#[derive(Debug, Clone)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Vec<BinaryMask>>,
    pub truth: Vec<Option<usize>>,
}

pub fn rect(width: u32, height: u32, x0: u32, y0: u32, w: u32, h: u32) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
    })
    .expect("scene dims are nonzero")
}

/// A 6x6 square moving one pixel right per frame on a 32x32 canvas, with
/// three distractors: a static square, a vertically offset copy of the
/// object (IoU 1/3 against the previous position) and a bottom bar. The
/// object's position in the candidate list rotates each frame.
pub fn translating_square(frames: usize) -> Scene {
    let (w, h) = (32, 32);
    assert!(frames <= 21, "square leaves the canvas after 21 frames");
    let mut out = Vec::with_capacity(frames);
    let mut truth = Vec::with_capacity(frames);
    for t in 0..frames as u32 {
        let object = rect(w, h, 2 + t, 4, 6, 6);
        let mut cands = vec![
            rect(w, h, 24, 14, 6, 6),
            rect(w, h, 2 + t, 7, 6, 6).intersection(&object.invert()).unwrap(),
            rect(w, h, 0, 26, 32, 6),
        ];
        let slot = t as usize % 4;
        cands.insert(slot, object);
        out.push(cands);
        truth.push(Some(slot));
    }
    Scene { width: w, height: h, frames: out, truth }
}

/// Every frame offers the same candidates: the object and two distractors.
pub fn static_object(frames: usize) -> Scene {
    let (w, h) = (16, 16);
    let cands = vec![
        rect(w, h, 2, 2, 5, 5),
        rect(w, h, 4, 4, 5, 5),
        rect(w, h, 10, 10, 4, 4),
    ];
    Scene {
        width: w,
        height: h,
        frames: vec![cands; frames],
        truth: vec![Some(0); frames],
    }
}

/// Object A for frames `0..cut`, then a hard cut to a scene where every
/// candidate is disjoint from A. The new object is candidate 1 after the cut.
pub fn scene_cut(frames: usize, cut: usize) -> Scene {
    let (w, h) = (16, 16);
    let before = vec![
        rect(w, h, 1, 1, 5, 5),
        rect(w, h, 9, 1, 5, 3),
        rect(w, h, 1, 12, 14, 3),
    ];
    let after = vec![
        rect(w, h, 8, 8, 2, 2),
        rect(w, h, 9, 6, 6, 6),
        rect(w, h, 7, 0, 2, 4),
    ];
    let frames_v: Vec<_> = (0..frames)
        .map(|t| if t < cut { before.clone() } else { after.clone() })
        .collect();
    let truth = (0..frames).map(|t| Some(if t < cut { 0 } else { 1 })).collect();
    Scene { width: w, height: h, frames: frames_v, truth }
}

/// Deterministic colorful frame, different for every `(seed, t)`.
pub fn frame_image(width: u32, height: u32, seed: u8, t: usize) -> RgbImage {
    let t = t as u32;
    RgbImage::from_fn(width, height, |x, y| {
        Rgb([
            (x * 7 + t * 3) as u8 ^ seed,
            (y * 11 + t * 5) as u8,
            ((x + y) * 5 + t) as u8 ^ seed.rotate_left(3),
        ])
    })
}

/// Writes frames, mask PNGs and `manifest.json` for `scene` into `dir`.
/// `labels`, when given, names the candidates of every frame by position.
pub fn write_scene(dir: &Path, scene: &Scene, labels: Option<&[&str]>) -> Result<PathBuf> {
    let frames_dir = dir.join("frames");
    let masks_dir = dir.join("masks");
    for d in [&frames_dir, &masks_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut frames = Vec::with_capacity(scene.frames.len());
    for (t, cands) in scene.frames.iter().enumerate() {
        let image_rel = PathBuf::from("frames").join(frame_file_name(t));
        write_frame(
            &Frame::Rgb(frame_image(scene.width, scene.height, 0x5a, t)),
            dir.join(&image_rel),
        )?;
        let mut candidates = Vec::with_capacity(cands.len());
        for (i, m) in cands.iter().enumerate() {
            let rel = PathBuf::from("masks").join(format!("{t:06}_{i:02}.png"));
            write_mask_image(m, dir.join(&rel))?;
            let mut meta = CandidateMeta::default().with_geometry(m);
            meta.label = labels.and_then(|l| l.get(i)).map(|s| s.to_string());
            candidates.push(Candidate {
                mask: MaskSource::File(rel),
                meta,
            });
        }
        frames.push(FrameCandidates {
            frame_index: t,
            image_path: image_rel,
            candidates,
        });
    }
    let path = dir.join(MANIFEST_FILE_NAME);
    write_manifest(&Manifest::new(scene.width, scene.height, frames), &path)?;
    Ok(path)
}

/// Writes `count` background frames of the given size into `dir`.
pub fn write_background(dir: &Path, count: usize, width: u32, height: u32) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..count)
        .map(|t| {
            let path = dir.join(frame_file_name(t));
            write_frame(&Frame::Rgb(frame_image(width, height, 0xc3, t)), &path)?;
            Ok(path)
        })
        .collect()
}
