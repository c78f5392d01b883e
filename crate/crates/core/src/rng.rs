//! Pinned pseudo-random streams and seed derivation.
//!
//! Every episode draws from a xoshiro256** generator whose 256-bit state is
//! filled from the 64-bit seed by SplitMix64, the generator's reference
//! seeding. Uniforms on `[0, 1)` take the top 53 bits of each output:
//!
//! ```text
//! u = (x >> 11) * 2^-53
//! ```
//!
//! Batch runs get their seeds from [`derive_seed`]:
//!
//! ```text
//! derive_seed(base, i) = splitmix64(base XOR (i * 0x9E3779B97F4A7C15))
//! splitmix64(s): z = s + 0x9E3779B97F4A7C15
//!                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!                z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!                return z ^ (z >> 31)
//! ```
//!
//! All arithmetic wraps modulo 2^64. Each step is a bijection on `u64`, so
//! distinct run indices never collide for a fixed base. `derive_seed(0, 0)`
//! is `0xE220A8397B1DCDAF`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

/// Identifier written into output metadata.
pub const RNG_ALGORITHM: &str = "xoshiro256**/splitmix64-seeded";

/// Odd multiplier applied to the run index before mixing (the 64-bit golden ratio).
pub const RUN_INDEX_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLITMIX_M1: u64 = 0xBF58_476D_1CE4_E5B9;
const SPLITMIX_M2: u64 = 0x94D0_49BB_1331_11EB;

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_M1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_M2);
    z ^ (z >> 31)
}

/// Seed of run `run_index` in a batch started from `base`.
pub fn derive_seed(base: u64, run_index: u64) -> u64 {
    splitmix64(base ^ run_index.wrapping_mul(RUN_INDEX_MULTIPLIER))
}

/// An owned random stream. Never shared between runs.
#[derive(Debug, Clone)]
pub struct RandomStream {
    inner: Xoshiro256StarStar,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
