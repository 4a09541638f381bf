//! Counter-based Gaussian noise.
//!
//! Every draw is a pure function of `(seed, stream, site)`: the ChaCha8 block
//! function is positioned at word `4 * site` of the given stream, so the value
//! at a site never depends on how many other sites were drawn before it or on
//! which thread drew it.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream carrying the additive measurement noise `W`.
pub const STREAM_NOISE: u64 = 1;
/// Stream carrying the dither `W_d`.
pub const STREAM_DITHER: u64 = 2;

/// Words consumed per site: two `u64` values for one Box-Muller pair.
const WORDS_PER_SITE: u128 = 4;

#[derive(Debug, Clone)]
pub struct GaussianField {
    rng: ChaCha8Rng,
    std_dev: f64,
}

impl GaussianField {
    pub fn new(seed: u64, stream: u64, variance: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            std_dev: variance.max(0.0).sqrt(),
        }
    }

    /// Zero-mean Gaussian draw for `site`.
    pub fn sample(&mut self, site: u64) -> f64 {
        if self.std_dev == 0.0 {
            return 0.0;
        }
        self.std_dev * self.standard(site)
    }

    /// Standard normal draw for `site` (Box-Muller, cosine branch).
    pub fn standard(&mut self, site: u64) -> f64 {
        self.rng.set_word_pos(site as u128 * WORDS_PER_SITE);
        // u1 in (0, 1], u2 in [0, 1).
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}
