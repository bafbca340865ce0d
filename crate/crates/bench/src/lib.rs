//! Inputs shared by the benchmarks.

use maskfuse_core::BinaryMask;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Mask with each pixel set with probability `density`.
pub fn random_mask(width: u32, height: u32, density: f64, seed: u64) -> BinaryMask {
    let mut rng = StdRng::seed_from_u64(seed);
    BinaryMask::from_fn(width, height, |_, _| rng.random_bool(density)).unwrap()
}

/// Rectangle-ish blob mask, closer to what segmentation models produce.
pub fn blob_mask(width: u32, height: u32, seed: u64) -> BinaryMask {
    let mut rng = StdRng::seed_from_u64(seed);
    let x0 = rng.random_range(0..width / 2);
    let y0 = rng.random_range(0..height / 2);
    let w = rng.random_range(1..=width - x0);
    let h = rng.random_range(1..=height - y0);
    maskfuse_core::synth::rect(width, height, x0, y0, w, h)
}
