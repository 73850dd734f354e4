//! Deterministic seed derivation. Every randomized component draws from a
//! seed mixed out of its parent seed and a role tag, so parallel and serial
//! schedules produce identical results.

/// splitmix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a role `tag`.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Derive a child seed from `seed` and several role components.
pub fn mix_many(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |acc, &t| mix(acc, t))
}

pub const TAG_FOLD_PLAN: u64 = 0x01;
pub const TAG_CV_SHUFFLE: u64 = 0x02;
pub const TAG_TREE: u64 = 0x03;
pub const TAG_DGP: u64 = 0x04;
pub const TAG_BETA_PERMUTATION: u64 = 0x05;
pub const TAG_CROSSFIT: u64 = 0x06;
pub const TAG_ESTIMATOR: u64 = 0x07;
