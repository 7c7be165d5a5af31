//! Counter-based random streams.
//!
//! Every stochastic draw in the crate is addressed by `(seed, stream)`, where
//! the stream id is derived from the logical coordinates of the draw (frame
//! index, iteration, loss term, ...). ChaCha is a counter-mode generator, so
//! a stream can be opened directly at any address and results never depend on
//! evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-space tags that keep unrelated consumers disjoint.
pub mod domain {
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const CORPUS: u64 = 0x434f_5250;
    pub const VIDEO: u64 = 0x5649_4445;
    pub const INIT: u64 = 0x494e_4954;
    pub const PATCHES: u64 = 0x5041_5443;
}

/// SplitMix64 finalizer; a bijective 64-bit mixer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of coordinates into one stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in the open interval (0, 1), 53 bits of resolution.
#[inline]
pub fn uniform_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal samples via the Box–Muller transform; both outputs of each
/// pair are used.
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        BoxMuller { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = uniform_open(&mut self.rng);
        let u2 = uniform_open(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}
