//! Seeded random substreams.
//!
//! Every random draw in an experiment comes from a substream keyed by
//! `(master_seed, purpose, client, round)`. Derivation is a pure hash, so the
//! draws a client sees do not depend on cohort order, cohort size or on how
//! many other substreams were consumed before it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator handed out for one `(purpose, client, round)` key.
pub type SubStream = ChaCha12Rng;

/// What a substream is used for. Distinct tags yield independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    TestData = 2,
    Training = 3,
    Attack = 4,
    Ldp = 5,
    Response = 6,
    Selection = 7,
    Roles = 8,
    Profile = 9,
}

/// Client id used for server-side (non client-specific) streams.
pub const SERVER: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn substream(&self, purpose: Purpose, client: u64, round: u64) -> SubStream {
        let mut state = splitmix(self.master_seed ^ 0x243f_6a88_85a3_08d3);
        state = splitmix(state ^ purpose as u64);
        state = splitmix(state ^ client);
        state = splitmix(state ^ round);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

// SplitMix64 finalizer.
fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
