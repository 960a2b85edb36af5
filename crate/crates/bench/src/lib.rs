//! Fixtures shared by the benchmarks.

use indnet::instance::{generate_synthetic, SizeClass, TransitInstance};

pub fn tiny(seed: u64) -> TransitInstance {
    generate_synthetic(seed, SizeClass::Tiny).expect("tiny instances generate")
}

/// Seeds with a nonzero optimum, which make the searches do real work.
pub const BUSY_SEEDS: [u64; 4] = [1, 7, 14, 25];
