//! Counter-based RNG derivation.
//!
//! Every random stream is a ChaCha8 generator whose 256-bit key is expanded
//! from a [`StreamKey`] and whose 64-bit stream id is the trial counter. The
//! numbers a trial sees depend only on `(master seed, point key, trial)`, not
//! on which worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hierarchical key built by folding 64-bit components into a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        let mut s = master_seed;
        StreamKey(splitmix64(&mut s))
    }

    pub fn with(self, component: u64) -> Self {
        let mut s = self.0 ^ component.wrapping_mul(GOLDEN).rotate_left(17);
        StreamKey(splitmix64(&mut s))
    }

    pub fn with_f64(self, component: f64) -> Self {
        self.with(component.to_bits())
    }

    pub fn with_str(self, component: &str) -> Self {
        component
            .bytes()
            .fold(self.with(component.len() as u64), |k, b| k.with(b as u64))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Generator for the `counter`-th stream under this key.
    pub fn rng(self, counter: u64) -> TrialRng {
        let mut s = self.0;
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(counter);
        rng
    }
}
