use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Builds an independent, portable generator stream from a domain tag and a
/// list of integers. Distinct `(tag, parts)` give unrelated streams.
pub fn derive_rng(tag: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Mixes a base seed with an index into a fresh 64-bit seed.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"mix");
    h.update(base.to_le_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
