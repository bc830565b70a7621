//! Reproducible, splittable random streams.
//!
//! A stream is ChaCha8 keyed by `seed_from_u64(seed)` with the cipher's
//! 64-bit stream counter set to `stream_id`. Streams with equal `(seed,
//! stream_id)` produce bit-identical output on every platform; different
//! stream ids select disjoint keystreams of the same key.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// Identifies a stream: the pair that determines its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer, used to spread child indices over stream ids.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            key: StreamKey { seed, stream_id },
            inner,
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// A fresh stream of the same seed whose id is a hash of this stream's
    /// id and `child`. Does not advance `self`.
    pub fn split(&self, child: u64) -> RngStream {
        let id = mix64(self.key.stream_id ^ mix64(child.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        RngStream::new(self.key.seed, id)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard exponential.
    pub fn exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    pub fn coin(&mut self) -> bool {
        self.inner.random::<bool>()
    }

    /// Access for `rand_distr` distributions.
    pub fn as_rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}
