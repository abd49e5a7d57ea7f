//! Seeded random streams.
//!
//! Every generator in the crate draws from a ChaCha8 stream identified by a
//! `(seed, stream)` pair, so results depend only on parameters and seeds and
//! independent consumers never share a stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::NonnegMatrix;

/// Stream identifiers used inside the crate.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const RESEED: u64 = 2;
    pub const PLANTED: u64 = 3;
    pub const POISSON: u64 = 10;
    pub const GAUSSIAN: u64 = 11;
    pub const GAMMA: u64 = 12;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a master seed with an index (trial number, band, ...) into a child seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn uniform_positive(rng: &mut impl Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Matrix of i.i.d. uniform `(0, 1]` entries.
pub fn uniform_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> NonnegMatrix {
    NonnegMatrix::from_fn(rows, cols, |_, _| uniform_positive(rng))
}
