//! Random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`) keyed by
//! `seed_from_u64(master_seed)` with the 64-bit stream id set to the
//! replicate index. ChaCha is counter based, so streams `(seed, 0)`,
//! `(seed, 1)`, ... are independent and can be generated in any order.
//! Trajectories are bitwise reproducible within this implementation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type UrnRng = ChaCha8Rng;

pub fn stream_rng(master_seed: u64, stream: u64) -> UrnRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval `(0, 1)`: the top 52 bits of a `u64`
/// shifted to the centre of their bin, so neither endpoint is reachable
/// (with 53 bits the largest value rounds up to exactly 1).
pub fn open_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 52) as f64;
    ((rng.next_u64() >> 12) as f64 + 0.5) * SCALE
}
