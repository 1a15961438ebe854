//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(seed, domain, counter)`. Two calls with the same address produce the
//! same sequence, independent of the order or the thread they run on, which
//! keeps Monte Carlo runs and sweeps bit-stable under parallel schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draw domains, so that independent consumers never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    GroundTruth = 1,
    Rsrp = 2,
    Sweep = 3,
    Rotation = 4,
    Noise = 5,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, domain, counter)`.
pub fn stream(seed: u64, domain: Domain, counter: u64) -> ChaCha8Rng {
    let key = mix(seed ^ mix(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(counter);
    rng
}

/// Packs a `(t, m)` pair into one stream counter.
pub fn sample_counter(t: u64, m: usize) -> u64 {
    debug_assert!(m < (1 << 24));
    (t << 24) | m as u64
}
