//! Deterministic per-replica random-number streams.
//!
//! Every random draw in a run derives from (master_seed, replica_id) through
//! the fixed construction below; nothing reads clocks, thread ids, or any
//! other environment entropy. Streams for distinct pairs are statistically
//! independent for practical purposes (distinct PCG state and stream
//! increment after avalanche mixing); identical pairs reproduce identical
//! sequences bit for bit.
//!
//! Construction "pcg64-splitmix64-v1", bit-exact:
//!   h    = mix64(master_seed XOR mix64(replica_id * GAMMA + 1))
//!   k[i] = mix64(h + (i+1)*GAMMA)            for i = 0..3
//!   rng  = Pcg64::new(state, stream) with
//!          state  = (k[0] as u128) << 64 | k[1]
//!          stream = (k[2] as u128) << 64 | k[3]
//! where mix64 is the splitmix64 finalizer and GAMMA its weyl constant; all
//! arithmetic wraps mod 2^64.

use rand::Rng;
use rand_pcg::Pcg64;

/// Weyl constant of the splitmix64 generator.
pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a bijective avalanche mix on 64 bits.
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The four seed words of construction v1.
pub fn replica_words(master_seed: u64, replica_id: u64) -> [u64; 4] {
    let h = mix64(master_seed ^ mix64(replica_id.wrapping_mul(GAMMA).wrapping_add(1)));
    let mut words = [0u64; 4];
    for (i, w) in words.iter_mut().enumerate() {
        *w = mix64(h.wrapping_add(GAMMA.wrapping_mul(i as u64 + 1)));
    }
    words
}

/// The replica stream for (master_seed, replica_id).
pub fn replica_rng(master_seed: u64, replica_id: u64) -> Pcg64 {
    let k = replica_words(master_seed, replica_id);
    let state = (k[0] as u128) << 64 | k[1] as u128;
    let stream = (k[2] as u128) << 64 | k[3] as u128;
    Pcg64::new(state, stream)
}

/// Derives a sub-seed for an auxiliary purpose (bootstrap resampling, mutation
/// fixtures) so auxiliary draws never share a stream with replica dynamics.
pub fn derived_seed(master_seed: u64, tag: u64) -> u64 {
    mix64(master_seed ^ mix64(tag).rotate_left(32))
}

/// Uniform draw in (0,1] with 53-bit resolution; never returns 0, so it is
/// safe under a logarithm.
pub fn uniform_open01<R: Rng>(rng: &mut R) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
}

/// Unit-rate exponential by inverse CDF.
pub fn unit_exponential<R: Rng>(rng: &mut R) -> f64 {
    -uniform_open01(rng).ln()
}
