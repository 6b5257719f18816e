//! Seeded RNG streams. One master seed fans out into independent named
//! streams so that changing one experimental axis (say, the corruption
//! pattern) does not perturb the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STREAM_DATA: u64 = 0;
pub const STREAM_EVOLUTION: u64 = 1;
pub const STREAM_PAIRING: u64 = 2;
pub const STREAM_CORRUPTION: u64 = 3;

pub fn stream(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Standard normal draw via Box-Muller; deterministic given the stream.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
