//! Per-path random streams derived from one master seed.
//!
//! Path `p` gets a ChaCha8 generator whose 32-byte key is four consecutive
//! SplitMix64 outputs, starting from `master + (p + 1) * GOLDEN`. Standard
//! normals come from Box-Muller on 53-bit uniforms, using both outputs of
//! each pair. Everything here is integer arithmetic or IEEE-754 basic
//! operations plus `ln`, `sqrt`, `sin_cos`, so reruns are bit-identical.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for path `index` under `master`.
pub fn path_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut state = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Standard normal variates by Box-Muller.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(rng: ChaCha8Rng) -> Self {
        NormalStream { rng, spare: None }
    }

    pub fn for_path(master: u64, index: u64) -> Self {
        Self::new(path_rng(master, index))
    }

    /// Uniform on `(0, 1]`.
    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform().ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * self.uniform()).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }
}
