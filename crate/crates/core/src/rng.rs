//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a user-visible base seed mixed with a stream tag, so that
//! independent work items can run in any order and still agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Kept distinct so derived seeds never collide across roles.
pub(crate) mod stream {
    pub const FOLDS: u64 = 0x666f_6c64;
    pub const BAG_SAMPLE: u64 = 0x6261_6773;
    pub const BAG_BOOST: u64 = 0x6261_6762;
    pub const JITTER: u64 = 0x6a69_7474;
    pub const TREE: u64 = 0x7472_6565;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const DATA: u64 = 0x6461_7461;
    pub const ALGO: u64 = 0x616c_676f;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `base ⊕ hash(tags...)`, folded left over the tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(base, |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
