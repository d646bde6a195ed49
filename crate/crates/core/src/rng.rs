//! Counter-based per-cycle random streams.
//!
//! Every Monte Carlo cycle draws from its own ChaCha stream derived from
//! (master seed, cycle index), so cycles are order-independent and can be
//! simulated on any number of workers without changing the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream for one Monte Carlo cycle.
pub fn cycle_rng(master_seed: u64, cycle: u64) -> SimRng {
    let mixed = splitmix64(master_seed ^ splitmix64(cycle.wrapping_add(0x51_7C_C1B7_2722_0A95)));
    SimRng::seed_from_u64(mixed)
}

/// Deterministic sub-stream, e.g. for one state of a common-random-number pair.
pub fn sub_rng(master_seed: u64, cycle: u64, lane: u64) -> SimRng {
    let mixed = splitmix64(master_seed ^ splitmix64(cycle) ^ splitmix64(lane.wrapping_mul(0xA24B_AED4_963E_E407)));
    SimRng::seed_from_u64(mixed)
}
