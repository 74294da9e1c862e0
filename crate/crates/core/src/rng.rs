use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for a named sub-stream of a run seed.
pub(crate) fn stream_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut state = mix(seed);
    for &p in parts {
        state = mix(state ^ mix(p));
    }
    ChaCha8Rng::seed_from_u64(state)
}

pub(crate) mod purpose {
    pub const MOTION: u64 = 1;
    pub const ANNOTATION: u64 = 2;
    pub const RESAMPLE: u64 = 3;
    pub const SENSE: u64 = 4;
    pub const REPLAY: u64 = 5;
    pub const FIXTURE: u64 = 6;
}
