//! Deterministic random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, purpose, index)`. Chains are indexed, so results do not depend on
//! how chains are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for unrelated tasks apart under one seed.
pub mod purpose {
    pub const CHAIN: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const WARM_START: u64 = 3;
    pub const PILOT: u64 = 4;
    pub const VOLUME_PHASE: u64 = 5;
    pub const ETA: u64 = 6;
    pub const DIAGNOSTIC: u64 = 7;
    pub const REJECTION: u64 = 8;
    pub const SLABS: u64 = 9;
    pub const ROUNDING: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. for a sub-computation that itself opens streams.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(purpose)) ^ index)
}

/// Opens the stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose)));
    rng.set_stream(index);
    rng
}

/// Fills `out` with a uniform point of the ball of radius `radius` around the
/// origin: Gaussian direction, radius `radius * U^(1/n)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64, out: &mut [f64]) {
    let n = out.len();
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = g;
            norm2 += g * g;
        }
        if norm2 > 1e-300 {
            let u: f64 = rng.random();
            let scale = radius * u.powf(1.0 / n as f64) / norm2.sqrt();
            for v in out.iter_mut() {
                *v *= scale;
            }
            return;
        }
    }
}

/// Uniform unit direction.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
