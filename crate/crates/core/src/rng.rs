//! Counter-keyed random streams.
//!
//! Every random draw in the library comes from a ChaCha stream whose seed is
//! derived from a key such as `(seed, purpose, voxel, subject)`. Results are
//! therefore independent of evaluation order and of which other keys were
//! used, which keeps parallel maps reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes, so unrelated consumers of one seed never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Population = 1,
    Effects = 2,
    Split = 3,
    Power = 4,
    MonteCarlo = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator keyed by `seed`, a purpose and an arbitrary list of counters.
pub fn keyed(seed: u64, purpose: Purpose, counters: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed ^ 0x5851_f42d_4c95_7f2d);
    h = splitmix64(h ^ purpose as u64);
    for &c in counters {
        h = splitmix64(h ^ splitmix64(c));
    }
    let mut bytes = [0u8; 32];
    let mut s = h;
    for chunk in bytes.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
