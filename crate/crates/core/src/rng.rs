//! Reproducible random streams.
//!
//! Every trial draws from its own ChaCha8 stream whose key is derived from the
//! master seed and a domain tag (experiment and degree) and whose stream
//! number is the trial index. The stream is a pure function of those inputs,
//! so results do not depend on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Gaussian sampler recorded in run metadata.
pub const GAUSSIAN_METHOD: &str = "ziggurat (rand_distr::StandardNormal) over ChaCha8";

/// Where a random object came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub trial_index: u64,
}

/// Domain separation tags so that different experiments never share streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Harmonic,
    Perturbation,
    PlaneWave,
    Lattice,
    Centers,
    Bootstrap,
    Sharpness,
    Calibration,
    Auxiliary,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Harmonic => 0x6861_726d,
            Stream::Perturbation => 0x7065_7274,
            Stream::PlaneWave => 0x7761_7665,
            Stream::Lattice => 0x6c61_7474,
            Stream::Centers => 0x6365_6e74,
            Stream::Bootstrap => 0x626f_6f74,
            Stream::Sharpness => 0x7368_6172,
            Stream::Calibration => 0x6361_6c69,
            Stream::Auxiliary => 0x6175_7869,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for `(master seed, kind, size parameter, trial index)`.
///
/// `size` is the degree for harmonic streams, the wave count or lattice side
/// elsewhere; it keeps ensembles at different sizes independent.
pub fn trial_rng(master_seed: u64, kind: Stream, size: u64, trial_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix(
        master_seed ^ splitmix(kind.tag()) ^ splitmix(size.wrapping_mul(0x2545_f491_4f6c_dd1d)),
    );
    for chunk in key.chunks_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial_index);
    rng
}
