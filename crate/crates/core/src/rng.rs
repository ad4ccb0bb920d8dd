//! Counter-based pseudo-random streams.
//!
//! Monte Carlo work derives one independent stream per (replica, stage)
//! from a single master seed, so results are reproducible under any
//! parallel schedule: the stream key is a hash of the identifying triple
//! and the draw sequence is a pure function of the key.
//!
//! The generator is SplitMix64: output `i` is a bijective finalising mix
//! of `key + i * GOLDEN`, which makes it a genuine counter-based design.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream of pseudo-random numbers.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    /// Stream keyed directly by a seed.
    pub fn new(seed: u64) -> Self {
        Stream { state: mix64(seed) }
    }

    /// Stream for a given replica and stage under a master seed.
    ///
    /// Distinct (seed, replica, stage) triples map to distinct keys up to
    /// the collision probability of the 64-bit mix; the derivation is
    /// `mix(mix(mix(seed) ^ replica) ^ stage)`.
    pub fn derived(master_seed: u64, replica: u64, stage: u64) -> Self {
        let k = mix64(mix64(mix64(master_seed) ^ replica) ^ stage);
        Stream { state: k }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform draw in `(0, 1]`; never returns 0 so `ln` is always finite.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        let bits = self.next_u64() >> 11; // 53 bits
        (bits + 1) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Exponential variate with the given rate.
    #[inline]
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        -self.next_unit().ln() / rate
    }

    /// Uniform point on the probability simplex of the given dimension.
    ///
    /// Normalised standard exponentials, i.e. a flat Dirichlet sample.
    pub fn next_simplex(&mut self, dim: usize) -> Vec<f64> {
        let mut w: Vec<f64> = (0..dim).map(|_| self.next_exp(1.0)).collect();
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        w
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        // Rejection-free multiply-shift; bias is negligible for n << 2^64.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
