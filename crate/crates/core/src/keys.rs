//! Counter-based randomness.
//!
//! Every random quantity is a pure function of a 256-bit key obtained by
//! SHA-256 hash chaining, so trees can be expanded lazily, in any order, on
//! any number of threads, and still agree bit for bit.
//!
//! ```text
//! node(∅)      = H("sponge/root" ‖ seed)
//! node(w·j)    = H(node(w) ‖ j)              33-byte message
//! axis(w, k)   = H(node(w) ‖ 0 ‖ k)          34-byte message
//! ```

use rand::{Error as RandError, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::symbolic::Word;

/// A 256-bit stream key.
pub type Key = [u8; 32];

fn sha(parts: &[&[u8]]) -> Key {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Key of the root node of the realization tree for `seed`.
pub fn root_key(seed: u64) -> Key {
    sha(&[b"sponge/root", &seed.to_le_bytes()])
}

pub fn child_key(parent: &Key, letter: u8) -> Key {
    sha(&[parent, &[letter]])
}

/// Stream key for the ratio vector drawn at node `node` on axis `axis`.
pub fn axis_key(node: &Key, axis: usize) -> Key {
    sha(&[node, &[0u8, axis as u8]])
}

/// Node key of `word` under `seed`.
pub fn node_key(seed: u64, word: &Word) -> Key {
    word.letters()
        .iter()
        .fold(root_key(seed), |k, &c| child_key(&k, c))
}

/// `stream_key(seed, word, axis)`: the key that drives the ratio vector of
/// the children of `word` on `axis`.
pub fn stream_key(seed: u64, word: &Word, axis: usize) -> Key {
    axis_key(&node_key(seed, word), axis)
}

/// Derives an independent key from `base` and a tagged counter.
pub fn derive(base: &Key, tag: &[u8], counter: u64) -> Key {
    sha(&[base, tag, &counter.to_le_bytes()])
}

/// Derives a 64-bit seed from a seed and a counter (e.g. per-trial seeds).
pub fn derive_seed(seed: u64, tag: &[u8], counter: u64) -> u64 {
    let k = sha(&[b"sponge/seed", &seed.to_le_bytes(), tag, &counter.to_le_bytes()]);
    u64::from_le_bytes(k[..8].try_into().unwrap())
}

/// Random stream for one key.
///
/// The first four 64-bit outputs are the key words themselves (already
/// uniformly distributed SHA-256 output); later outputs come from a ChaCha8
/// generator seeded with the key. Most ratio vectors need at most four
/// uniforms, so the stream usually costs no more than the hash.
pub struct StreamRng {
    key: Key,
    used: usize,
    fallback: Option<ChaCha8Rng>,
}

impl StreamRng {
    pub fn new(key: Key) -> Self {
        StreamRng {
            key,
            used: 0,
            fallback: None,
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        if self.used < 4 {
            let i = self.used * 8;
            self.used += 1;
            return u64::from_le_bytes(self.key[i..i + 8].try_into().unwrap());
        }
        let key = self.key;
        self.fallback
            .get_or_insert_with(|| ChaCha8Rng::from_seed(key))
            .next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.fill_bytes(dest);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_matches_direct() {
        let w = Word::from_letters(&[1, 3, 2]);
        let k = child_key(&child_key(&child_key(&root_key(9), 1), 3), 2);
        assert_eq!(node_key(9, &w), k);
        assert_eq!(stream_key(9, &w, 1), axis_key(&k, 1));
    }

    #[test]
    fn distinct_inputs_distinct_keys() {
        let w = Word::from_letters(&[1]);
        assert_ne!(stream_key(1, &w, 0), stream_key(1, &w, 1));
        assert_ne!(stream_key(1, &w, 0), stream_key(2, &w, 0));
        assert_ne!(node_key(1, &w), stream_key(1, &Word::empty(), 1));
    }

    #[test]
    fn stream_is_deterministic_past_the_key() {
        let mut a = StreamRng::new(root_key(3));
        let mut b = StreamRng::new(root_key(3));
        let xa: Vec<u64> = (0..10).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..10).map(|_| b.next_u64()).collect();
        assert_eq!(xa, xb);
        let mut c = StreamRng::new(root_key(3));
        let u: f64 = (0..1000).map(|_| c.uniform()).sum::<f64>() / 1000.0;
        assert!((u - 0.5).abs() < 0.05);
    }
}
