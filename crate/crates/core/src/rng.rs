//! Seeded random number generation and stable seed derivation.
//!
//! Every random draw in the crate goes through [`rng_from_seed`] so that
//! results depend only on explicit seeds, never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from a parent seed and a list of labelled parts.
///
/// The derivation hashes its inputs with SHA-256, so it is stable across
/// platforms and compiler versions, and a change to one part perturbs only
/// the seeds that mention it.
pub fn derive_seed(parent: u64, parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(parent.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Seed for the `index`-th independent trial of an experiment.
pub fn trial_seed(parent: u64, label: &str, index: u64) -> u64 {
    derive_seed(parent, &[label.as_bytes(), &index.to_le_bytes()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derivation_is_stable_and_part_sensitive() {
        let a = derive_seed(7, &[b"input-1", &[1, 2, 3]]);
        assert_eq!(a, derive_seed(7, &[b"input-1", &[1, 2, 3]]));
        assert_ne!(a, derive_seed(8, &[b"input-1", &[1, 2, 3]]));
        assert_ne!(a, derive_seed(7, &[b"input-2", &[1, 2, 3]]));
        // length prefixes keep part boundaries significant
        assert_ne!(derive_seed(7, &[b"ab", b"c"]), derive_seed(7, &[b"a", b"bc"]));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = rng_from_seed(99);
        let mut b = rng_from_seed(99);
        for _ in 0..16 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }
}
