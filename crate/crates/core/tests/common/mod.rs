//! Brute-force oracles over plain `Vec<bool>` grids. They never touch the
//! bit-packed representation, so they check it independently.

#![allow(dead_code)]

use maskfuse_core::BinaryMask;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Grid {
    pub fn random(rng: &mut StdRng, width: usize, height: usize) -> Self {
        // vary density so near-empty and near-full masks show up too
        let density: f64 = rng.random_range(0.0..=1.0);
        let bits = (0..width * height).map(|_| rng.random_bool(density)).collect();
        Self { width, height, bits }
    }

    pub fn at(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_bits(self.width as u32, self.height as u32, &self.bits).unwrap()
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn oracle_area(g: &Grid) -> u64 {
    let mut n = 0;
    for y in 0..g.height {
        for x in 0..g.width {
            if g.at(x, y) {
                n += 1;
            }
        }
    }
    n
}

pub fn oracle_iou(a: &Grid, b: &Grid) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..a.height {
        for x in 0..a.width {
            let (p, q) = (a.at(x, y), b.at(x, y));
            if p && q {
                inter += 1;
            }
            if p || q {
                union += 1;
            }
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// `[x, y, w, h]` of the set pixels, by scanning min/max coordinates.
pub fn oracle_bbox(g: &Grid) -> Option<[u32; 4]> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for y in 0..g.height {
        for x in 0..g.width {
            if g.at(x, y) {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let (x0, x1) = (*xs.iter().min()?, *xs.iter().max()?);
    let (y0, y1) = (*ys.iter().min()?, *ys.iter().max()?);
    Some([x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32])
}

pub fn mask_to_vec(m: &BinaryMask) -> Vec<bool> {
    let mut out = Vec::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            out.push(m.get(x, y));
        }
    }
    out
}

/// Brute-force IoU straight from two masks' pixel accessors.
pub fn pixel_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (pa, pb) = (mask_to_vec(a), mask_to_vec(b));
    let inter = pa.iter().zip(&pb).filter(|(p, q)| **p && **q).count();
    let union = pa.iter().zip(&pb).filter(|(p, q)| **p || **q).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
