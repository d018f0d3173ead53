//! Seed streams.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the user seed,
//! with the 64-bit stream id split as `component (16 bits) | replicate (48 bits)`.
//! Chain, covariate, error and diagnostic draws are therefore independent and
//! individually reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Component {
    Chain = 1,
    Errors = 2,
    Covariates = 3,
    Truth = 4,
    Diagnostics = 5,
    Directions = 6,
}

const REPLICATE_BITS: u32 = 48;

pub fn stream_rng(seed: u64, component: Component, replicate: u64) -> ChaCha8Rng {
    assert!(replicate < 1 << REPLICATE_BITS, "replicate index too large");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((component as u64) << REPLICATE_BITS) | replicate);
    rng
}
