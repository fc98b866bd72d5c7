//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, index, draw)`, so results
//! do not depend on evaluation order or thread count. The mixing function is
//! the SplitMix64 finalizer applied as a keyed hash chain.

use std::f64::consts::TAU;

/// Stream tags. Each consumer of randomness owns one so that draws never
/// collide between, e.g., the calibration and test randomization.
pub mod streams {
    pub const SPLIT: u64 = 0x01;
    pub const SCORE_U: u64 = 0x02;
    pub const CALIBRATION_U: u64 = 0x03;
    pub const TEST_U: u64 = 0x04;
    pub const SYNTH: u64 = 0x05;
    pub const SLAB_DIRECTIONS: u64 = 0x06;
    pub const MLP_INIT: u64 = 0x07;
    pub const MLP_SHUFFLE: u64 = 0x08;
    pub const RINGS: u64 = 0x09;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const K_STREAM: u64 = 0xD1B5_4A32_D192_ED03;
const K_INDEX: u64 = 0xAEF1_7502_108E_F2D9;
const K_DRAW: u64 = 0xF0F1_3A4B_5C6D_7E8F;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Map 64 random bits to a double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn bits_to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A keyed, stateless generator. Cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
    stream: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent stream, keyed by `tag`.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream: mix64(self.stream ^ tag.wrapping_mul(K_STREAM)),
        }
    }

    #[inline]
    pub fn bits(&self, index: u64, draw: u64) -> u64 {
        let mut h = mix64(self.seed);
        h = mix64(h ^ self.stream.wrapping_mul(K_STREAM));
        h = mix64(h ^ index.wrapping_mul(K_INDEX));
        mix64(h ^ draw.wrapping_mul(K_DRAW))
    }

    #[inline]
    pub fn uniform(&self, index: u64, draw: u64) -> f64 {
        bits_to_unit(self.bits(index, draw))
    }

    /// Sequential cursor over the draws belonging to one index.
    pub fn at(&self, index: u64) -> SampleRng {
        SampleRng {
            key: *self,
            index,
            draw: 0,
        }
    }
}

/// Cursor over the draw counter of a fixed `(seed, stream, index)`.
#[derive(Debug, Clone)]
pub struct SampleRng {
    key: CounterRng,
    index: u64,
    draw: u64,
}

impl SampleRng {
    pub fn next_u64(&mut self) -> u64 {
        let b = self.key.bits(self.index, self.draw);
        self.draw += 1;
        b
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        bits_to_unit(self.next_u64())
    }

    /// Uniform in `(0, 1]`.
    pub fn open_uniform(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Standard normal via Box-Muller (consumes two draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.open_uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Integer in `[0, n)` by multiply-shift. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

/// Fisher-Yates permutation of `0..n`, keyed by `rng` (index 0 of the stream).
pub fn permutation(n: usize, rng: CounterRng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut cursor = rng.at(0);
    for i in (1..n).rev() {
        let j = cursor.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}
