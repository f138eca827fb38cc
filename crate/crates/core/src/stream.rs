//! Reproducible random streams.
//!
//! Every random decision in the crate draws from a [`SeededStream`], a
//! ChaCha8 generator addressed by `(seed, stream)`. ChaCha output is
//! specified bit-for-bit, so a given seed yields the same draws on every
//! platform. Sampling code is written against [`RandomSource`] so tests can
//! substitute scripted draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source of uniform draws in `[0, 1)`.
pub trait RandomSource {
    fn next_unit(&mut self) -> f64;
}

impl<R: RandomSource + ?Sized> RandomSource for &mut R {
    fn next_unit(&mut self) -> f64 {
        (**self).next_unit()
    }
}

const DERIVE_TAG: u64 = 0x5eed_5eed_0000_0001;

/// A seeded ChaCha8 stream with a readable position.
#[derive(Clone, Debug)]
pub struct SeededStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Reopen a stream at a previously recorded [`position`](Self::position).
    pub fn at_position(seed: u64, stream: u64, position: u128) -> Self {
        let mut s = Self::with_stream(seed, stream);
        s.rng.set_word_pos(position);
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// An independent child stream labelled `label`.
    ///
    /// The child depends only on `(seed, stream, label)`, never on how far
    /// the parent has advanced.
    pub fn derive(&self, label: u64) -> SeededStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(&label.to_le_bytes());
        key[24..].copy_from_slice(&DERIVE_TAG.to_le_bytes());
        let child_seed = ChaCha8Rng::from_seed(key).next_u64();
        SeededStream::new(child_seed)
    }

    /// Shorthand for a chain of [`derive`](Self::derive) calls.
    pub fn derive_path(&self, labels: &[u64]) -> SeededStream {
        labels
            .iter()
            .fold(self.clone(), |stream, &label| stream.derive(label))
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

impl RandomSource for SeededStream {
    /// 53 random mantissa bits; consumes exactly two words.
    fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
