//! Counter-based deterministic random streams.
//!
//! Every random value in the library is a pure function of
//! `(root_seed, path, step, replica)` plus a within-stream counter. Streams
//! can therefore be opened in any order on any number of workers and still
//! produce byte-identical results.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer. Bijective on u64 with good avalanche.
#[inline(always)]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline(always)]
fn absorb(state: u64, value: u64) -> u64 {
    mix64(state ^ value.wrapping_mul(GOLDEN).wrapping_add(0x2545_f491_4f6c_dd1d))
}

/// Coordinates identifying one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub path: u64,
    pub step: u64,
    pub replica: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64) -> Self {
        SeedSpec {
            root_seed,
            path: 0,
            step: 0,
            replica: 0,
        }
    }

    pub fn with(root_seed: u64, path: u64, step: u64, replica: u64) -> Self {
        SeedSpec {
            root_seed,
            path,
            step,
            replica,
        }
    }

    /// 64-bit stream key mixing all four coordinates.
    #[inline]
    pub fn key(&self) -> u64 {
        let k = absorb(mix64(self.root_seed ^ GOLDEN), self.path);
        absorb(absorb(k, self.step), self.replica)
    }
}

/// Key for the stream rooted at `(root, path, step)`; replica streams are
/// derived from it with a single extra mix (hot path in nested estimators).
#[derive(Debug, Clone, Copy)]
pub struct StepKey(u64);

impl StepKey {
    #[inline(always)]
    pub fn new(root_seed: u64, path: u64, step: u64) -> Self {
        let k = absorb(mix64(root_seed ^ GOLDEN), path);
        StepKey(absorb(k, step))
    }

    #[inline(always)]
    pub fn replica(self, replica: u64) -> CounterRng {
        CounterRng::from_key(absorb(self.0, replica))
    }
}

/// SplitMix64 stream seeded by a mixed stream key.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn new(spec: SeedSpec) -> Self {
        CounterRng { state: spec.key() }
    }

    #[inline(always)]
    pub(crate) fn from_key(key: u64) -> Self {
        CounterRng { state: key }
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline(always)]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1), never exactly 0 or 1 (safe for log/inverse-cdf).
    #[inline(always)]
    pub fn next_open_unit(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
    }
}

impl RngCore for CounterRng {
    #[inline(always)]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
