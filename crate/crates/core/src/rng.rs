//! Seeded random sources and random physical states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Mat4, C64};
use crate::quantum::TwoQubitState;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for stream `index` of `parent` (SplitMix64 finalizer), so that
/// per-run generators are independent of execution order.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random density matrix `GG†/Tr(GG†)` with `G` a 4×`rank` complex Ginibre
/// matrix. `rank = 4` gives the Hilbert–Schmidt ensemble, `rank = 1` a Haar
/// random pure state.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> TwoQubitState {
    let rank = rank.clamp(1, 4);
    let mut g = Mat4::zeros();
    for r in 0..4 {
        for c in 0..rank {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g.0[r][c] = C64::new(re, im);
        }
    }
    TwoQubitState::normalized(g * g.adjoint()).expect("Ginibre product has positive trace")
}
