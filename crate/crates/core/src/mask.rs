//! Binary masks and the pixel kernels built on them.
//!
//! Layout: one bit per pixel in row-major order, pixel `(x, y)` lives at
//! linear index `y * width + x`. Bits are packed little-endian into `u64`
//! words (index `i` is bit `i % 64` of word `i / 64`). Rows are not padded,
//! and the unused high bits of the last word are always zero so that word
//! level popcounts never need masking.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Axis-aligned box `[x, y, w, h]`; origin inclusive, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.x, self.y, self.w, self.h].serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y, w, h] = <[u32; 4]>::deserialize(d)?;
        Ok(Self { x, y, w, h })
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

fn word_count(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

impl BinaryMask {
    /// All-zero mask.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        let len = width as usize * height as usize;
        Ok(Self {
            width,
            height,
            words: vec![0; word_count(len)],
        })
    }

    /// All-one mask.
    pub fn full(width: u32, height: u32) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        mask.words.fill(u64::MAX);
        mask.clear_tail();
        Ok(mask)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }

    /// Builds a mask from row-major bits; `bits.len()` must equal `width * height`.
    pub fn from_bits(width: u32, height: u32, bits: &[bool]) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        if bits.len() != mask.len() {
            return Err(Error::Format(format!(
                "expected {} bits for a {width}x{height} mask, got {}",
                mask.len(),
                bits.len()
            )));
        }
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            mask.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Pixel count, `width * height`.
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Always false; masks are at least 1x1. Use [`BinaryMask::area`] to test for set pixels.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.get_index(y as usize * self.width as usize + x as usize)
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let i = y as usize * self.width as usize + x as usize;
        let bit = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= bit;
        } else {
            self.words[i / WORD_BITS] &= !bit;
        }
    }

    #[inline]
    fn get_index(&self, i: usize) -> bool {
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    /// Row-major bit iterator.
    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.get_index(i))
    }

    fn clear_tail(&mut self) {
        let rem = self.len() % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn intersection_area(&self, other: &Self) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum())
    }

    pub fn union_area(&self, other: &Self) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a | b).count_ones()))
            .sum())
    }

    /// Intersection over union. Two empty masks compare as identical (1.0).
    pub fn iou(&self, other: &Self) -> Result<f64> {
        self.check_dims(other)?;
        let (mut inter, mut union) = (0u64, 0u64);
        for (a, b) in self.words.iter().zip(&other.words) {
            inter += u64::from((a & b).count_ones());
            union += u64::from((a | b).count_ones());
        }
        if union == 0 {
            return Ok(1.0);
        }
        Ok(inter as f64 / union as f64)
    }

    /// Bitwise complement: foreground becomes background and vice versa.
    pub fn invert(&self) -> Self {
        let mut out = Self {
            width: self.width,
            height: self.height,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    /// Pixelwise OR.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        })
    }

    /// Pixelwise AND.
    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.check_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        })
    }

    /// Smallest box containing every set pixel, `None` for an empty mask.
    pub fn tight_bbox(&self) -> Option<BBox> {
        let width = self.width as usize;
        let (mut min_x, mut min_y) = (usize::MAX, usize::MAX);
        let (mut max_x, mut max_y) = (0usize, 0usize);
        for (wi, &word) in self.words.iter().enumerate() {
            let mut rest = word;
            while rest != 0 {
                let i = wi * WORD_BITS + rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let (x, y) = (i % width, i / width);
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
        if min_x == usize::MAX {
            return None;
        }
        Some(BBox {
            x: min_x as u32,
            y: min_y as u32,
            w: (max_x - min_x + 1) as u32,
            h: (max_y - min_y + 1) as u32,
        })
    }

    /// Nearest-neighbour resize. Destination pixel `d` samples source pixel
    /// `floor(d * src_extent / dst_extent)` independently on each axis.
    pub fn resize_nearest(&self, width: u32, height: u32) -> Result<Self> {
        if (width, height) == self.dims() {
            return Ok(self.clone());
        }
        let xs = nearest_index_map(self.width, width);
        let ys = nearest_index_map(self.height, height);
        let mut out = Self::new(width, height)?;
        let src_w = self.width as usize;
        let mut i = 0usize;
        for &sy in &ys {
            let row = sy as usize * src_w;
            for &sx in &xs {
                if self.get_index(row + sx as usize) {
                    out.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
                }
                i += 1;
            }
        }
        Ok(out)
    }
}

/// Source index for every destination index along one axis.
pub(crate) fn nearest_index_map(src: u32, dst: u32) -> Vec<u32> {
    (0..dst)
        .map(|d| (u64::from(d) * u64::from(src) / u64::from(dst)) as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&str]) -> BinaryMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        BinaryMask::from_fn(w, h, |x, y| rows[y as usize].as_bytes()[x as usize] == b'#').unwrap()
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(BinaryMask::new(0, 3), Err(Error::ZeroDimension { .. })));
        assert!(matches!(BinaryMask::new(3, 0), Err(Error::ZeroDimension { .. })));
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let a = BinaryMask::from_fn(8, 8, |x, y| x < 4 && y < 4).unwrap();
        assert_eq!(a.iou(&a).unwrap(), 1.0);
        let b = BinaryMask::from_fn(8, 8, |x, y| x >= 4 && y >= 4).unwrap();
        assert_eq!(a.iou(&b).unwrap(), 0.0);
    }

    #[test]
    fn iou_half() {
        let a = from_rows(&["#."]);
        let b = from_rows(&["##"]);
        assert_eq!(a.iou(&b).unwrap(), 0.5);
    }

    #[test]
    fn iou_of_empty_masks_is_one() {
        let e = BinaryMask::new(5, 5).unwrap();
        assert_eq!(e.iou(&e).unwrap(), 1.0);
    }

    #[test]
    fn iou_dimension_mismatch() {
        let a = BinaryMask::new(4, 4).unwrap();
        let b = BinaryMask::new(4, 5).unwrap();
        assert!(matches!(a.iou(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invert_counts() {
        let z = BinaryMask::new(4, 4).unwrap();
        assert_eq!(z.invert(), BinaryMask::full(4, 4).unwrap());
        // 7x3 = 21 bits leaves tail bits in the word, which must stay clear.
        let m = BinaryMask::from_fn(7, 3, |x, y| (x + y) % 3 == 0).unwrap();
        assert_eq!(m.area() + m.invert().area(), 21);
        assert_eq!(m.invert().invert(), m);
    }

    #[test]
    fn area_basics() {
        assert_eq!(BinaryMask::new(3, 5).unwrap().area(), 0);
        assert_eq!(BinaryMask::full(3, 5).unwrap().area(), 15);
    }

    #[test]
    fn bbox_single_pixel_and_empty() {
        let mut m = BinaryMask::new(10, 10).unwrap();
        assert_eq!(m.tight_bbox(), None);
        m.set(3, 7, true);
        assert_eq!(m.tight_bbox(), Some(BBox::new(3, 7, 1, 1)));
    }

    #[test]
    fn resize_identity_and_single_pixel() {
        let m = from_rows(&["#..", ".#.", "..#"]);
        assert_eq!(m.resize_nearest(3, 3).unwrap(), m);
        let one = BinaryMask::full(1, 1).unwrap();
        assert_eq!(one.resize_nearest(5, 7).unwrap(), BinaryMask::full(5, 7).unwrap());
    }

    #[test]
    fn resize_checkerboard_upscale() {
        let m = from_rows(&["#.", ".#"]);
        let up = m.resize_nearest(4, 4).unwrap();
        assert_eq!(up, from_rows(&["##..", "##..", "..##", "..##"]));
    }

    #[test]
    fn resize_downscale_picks_floor_index() {
        // src 5 -> dst 2: indices 0 and 2.
        let m = from_rows(&["#.#.."]);
        assert_eq!(m.resize_nearest(2, 1).unwrap(), from_rows(&["##"]));
    }

    #[test]
    fn bbox_serializes_as_array() {
        let b = BBox::new(0, 5, 2047, 836);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "[0,5,2047,836]");
        assert_eq!(serde_json::from_str::<BBox>(&s).unwrap(), b);
    }
}
