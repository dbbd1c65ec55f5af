//! Deterministic RNG stream derivation.
//!
//! Every Monte Carlo trial gets its own ChaCha8 stream derived from
//! `(master seed, component label, trial index)` through a splitmix64
//! chain. Trials are therefore independent of scheduling: the parallel and
//! sequential runners produce bit-identical ensembles, and re-running with
//! the same seed reproduces every byte of output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 step: decorrelates consecutive/reused inputs.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed, a component label and a trial index into one u64.
pub fn mix_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = splitmix64(master);
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

/// Derive the RNG stream for one trial of one component.
pub fn trial_rng(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, label, index))
}

/// Standard normal deviate (Box–Muller, polar-free form).
pub fn standard_normal<R: rand::RngExt>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
