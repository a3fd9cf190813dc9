//! Seeded randomness.
//!
//! Every random draw in the crate comes from a [`Pcg64`] (PCG XSL RR 128/64)
//! created with `seed_from_u64`, so results depend only on the seed and are
//! identical across platforms.

use rand::SeedableRng;
pub use rand_pcg::Pcg64;

pub fn seeded(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// Independent sub-seed for a named stream of a run (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
