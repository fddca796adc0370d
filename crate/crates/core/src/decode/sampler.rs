//! Seeded inverse-CDF token sampling.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`; each
//! draw takes the top 53 bits of one `next_u64` and scales them into
//! `[0, 1)`. Tokens are visited in ascending id order and the first whose
//! cumulative mass exceeds the draw is returned.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{Distribution, TokenId};

#[derive(Debug, Clone)]
pub struct TokenSampler {
    rng: ChaCha8Rng,
}

impl TokenSampler {
    pub fn new(seed: u64) -> Self {
        TokenSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self, dist: &Distribution) -> TokenId {
        let u = self.next_unit();
        sample_token(dist, u)
    }
}

/// Inverse-CDF lookup for a draw `u` in `[0, 1)`. Zero-probability tokens are
/// never returned; if rounding leaves `u` above the total mass, the last
/// token with positive mass is chosen.
pub fn sample_token(dist: &Distribution, u: f64) -> TokenId {
    let mut cdf = 0.0;
    let mut last = 0;
    for (i, &p) in dist.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cdf += p;
        last = i;
        if u < cdf {
            return TokenId(i as u32);
        }
    }
    TokenId(last as u32)
}
