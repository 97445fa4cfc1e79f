//! Deterministic per-node random streams split from one master seed.
//!
//! Every consumer of randomness (noise, permutations, z-samples, graph
//! sampling) gets its own ChaCha stream keyed by `(master, purpose, index)`, so
//! the result of a run never depends on the order nodes are processed in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    GradientNoise,
    Permutation,
    BoostingSample,
    Topology,
    Synthetic,
    Objective,
}

impl Purpose {
    fn salt(self) -> u64 {
        match self {
            Purpose::GradientNoise => 0x9e37_79b9_7f4a_7c15,
            Purpose::Permutation => 0xbf58_476d_1ce4_e5b9,
            Purpose::BoostingSample => 0x94d0_49bb_1331_11eb,
            Purpose::Topology => 0x2545_f491_4f6c_dd1d,
            Purpose::Synthetic => 0xd6e8_feb8_6659_fd93,
            Purpose::Objective => 0xa076_1d64_78bd_642f,
        }
    }
}

/// Random stream for `(master, purpose, index)`.
pub fn stream(master: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ purpose.salt());
    rng.set_stream(index);
    rng
}
