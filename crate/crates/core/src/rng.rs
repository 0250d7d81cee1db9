use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicateRng = ChaCha8Rng;

/// Seed used by replicate `replicate` of an experiment seeded with `base_seed`.
pub fn replicate_seed(base_seed: u64, replicate: u64) -> u64 {
    base_seed.wrapping_add(replicate)
}

/// Independent stream for one replicate.
pub fn replicate_rng(base_seed: u64, replicate: u64) -> ReplicateRng {
    ChaCha8Rng::seed_from_u64(replicate_seed(base_seed, replicate))
}
