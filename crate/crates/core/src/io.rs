//! Mask and frame images on disk.
//!
//! Masks are 8-bit single-channel PNGs: 0 is background, any nonzero value is
//! foreground, and written masks use 0/255. Frames are 8-bit RGB or RGBA PNGs.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, GrayImage, ImageFormat, RgbImage, RgbaImage};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::metrics::LabeledSegmentation;

/// A decoded video frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Rgb(RgbImage),
    Rgba(RgbaImage),
}

impl Frame {
    pub fn dims(&self) -> (u32, u32) {
        match self {
            Frame::Rgb(img) => img.dimensions(),
            Frame::Rgba(img) => img.dimensions(),
        }
    }

    /// Color planes only; alpha is dropped.
    pub fn to_rgb(&self) -> RgbImage {
        match self {
            Frame::Rgb(img) => img.clone(),
            Frame::Rgba(img) => DynamicImage::ImageRgba8(img.clone()).to_rgb8(),
        }
    }

    /// RGB frames gain an opaque alpha plane.
    pub fn to_rgba(&self) -> RgbaImage {
        match self {
            Frame::Rgb(img) => DynamicImage::ImageRgb8(img.clone()).to_rgba8(),
            Frame::Rgba(img) => img.clone(),
        }
    }

    pub fn into_rgb(self) -> RgbImage {
        match self {
            Frame::Rgb(img) => img,
            other => other.to_rgb(),
        }
    }
}

impl From<RgbImage> for Frame {
    fn from(img: RgbImage) -> Self {
        Frame::Rgb(img)
    }
}

impl From<RgbaImage> for Frame {
    fn from(img: RgbaImage) -> Self {
        Frame::Rgba(img)
    }
}

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingAsset(path.to_path_buf()));
    }
    image::open(path).map_err(|e| Error::image(path, e))
}

pub fn load_mask_image(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    match open(path)? {
        DynamicImage::ImageLuma8(gray) => mask_from_gray(&gray),
        other => Err(Error::Format(format!(
            "{}: mask must be 8-bit single-channel, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub fn mask_from_gray(gray: &GrayImage) -> Result<BinaryMask> {
    let (w, h) = gray.dimensions();
    let bits: Vec<bool> = gray.as_raw().iter().map(|&v| v != 0).collect();
    BinaryMask::from_bits(w, h, &bits)
}

pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    let raw = mask.bits().map(|b| if b { 255 } else { 0 }).collect();
    GrayImage::from_raw(mask.width(), mask.height(), raw).expect("buffer sized from mask")
}

pub fn write_mask_image(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    save_png(&DynamicImage::ImageLuma8(mask_to_gray(mask)), path)
}

/// Segment ids from an 8 or 16-bit single-channel PNG, one segment per value.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabeledSegmentation> {
    let path = path.as_ref();
    let img = open(path)?;
    let (w, h) = (img.width(), img.height());
    let labels: Vec<u32> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::Format(format!(
                "{}: label map must be 8 or 16-bit single-channel, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabeledSegmentation::from_label_map(w, h, &labels)
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    match open(path)? {
        DynamicImage::ImageRgb8(img) => Ok(Frame::Rgb(img)),
        DynamicImage::ImageRgba8(img) => Ok(Frame::Rgba(img)),
        other => Err(Error::Format(format!(
            "{}: frame must be 8-bit RGB or RGBA, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub fn write_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, frame_png(frame)).map_err(|e| Error::io(path, e))
}

/// Encodes an image as PNG bytes.
pub fn encode_png(img: &DynamicImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("PNG encoding into memory does not fail for 8-bit images");
    buf.into_inner()
}

/// PNG bytes of a frame, as written by [`write_frame`].
pub fn frame_png(frame: &Frame) -> Vec<u8> {
    encode_png(&match frame {
        Frame::Rgb(img) => DynamicImage::ImageRgb8(img.clone()),
        Frame::Rgba(img) => DynamicImage::ImageRgba8(img.clone()),
    })
}

/// PNG bytes of a mask as 0/255 gray.
pub fn mask_png(mask: &BinaryMask) -> Vec<u8> {
    encode_png(&DynamicImage::ImageLuma8(mask_to_gray(mask)))
}

fn save_png(img: &DynamicImage, path: &Path) -> Result<()> {
    debug_assert!(matches!(
        img.color(),
        ColorType::L8 | ColorType::Rgb8 | ColorType::Rgba8
    ));
    fs::write(path, encode_png(img)).map_err(|e| Error::io(path, e))
}

/// Image dimensions from the file header, without decoding pixels.
pub fn image_dims(path: impl AsRef<Path>) -> Result<(u32, u32)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingAsset(path.to_path_buf()));
    }
    image::image_dimensions(path).map_err(|e| Error::image(path, e))
}

/// Zero-padded six digit frame file name, `000042.png`.
pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// PNG files of a frame directory in lexicographic order.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingAsset(dir.to_path_buf()));
    }
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}
