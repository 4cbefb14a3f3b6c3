use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derives a 64-bit stream seed from the master seed and a label path.
///
/// All randomness in a run flows from the master seed through labeled
/// streams, so any component can be re-derived independently and runs are
/// bit-reproducible.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update([0xff]);
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// A counter-based generator for the labeled stream.
pub fn stream_rng(master: u64, parts: &[&str]) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update([0xff]);
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}
