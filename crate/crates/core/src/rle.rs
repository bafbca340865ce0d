//! Run-length coding of binary masks.
//!
//! Runs alternate between background and foreground over the row-major bit
//! order, always starting with the background run (which may be zero). An
//! all-zero 2x2 mask is `[4]`, an all-one 2x2 mask is `[0, 4]`.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

pub fn encode(mask: &BinaryMask) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u64;
    for bit in mask.bits() {
        if bit != current {
            runs.push(count);
            current = bit;
            count = 0;
        }
        count += 1;
    }
    runs.push(count);
    runs
}

pub fn decode(width: u32, height: u32, runs: &[u64]) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height)?;
    let total: u64 = runs.iter().sum();
    if total != mask.len() as u64 {
        return Err(Error::Format(format!(
            "run lengths sum to {total}, expected {} for a {width}x{height} mask",
            mask.len()
        )));
    }
    let w = u64::from(width);
    let mut pos = 0u64;
    for (i, &run) in runs.iter().enumerate() {
        if i % 2 == 1 {
            for p in pos..pos + run {
                mask.set((p % w) as u32, (p / w) as u32, true);
            }
        }
        pos += run;
    }
    Ok(mask)
}
