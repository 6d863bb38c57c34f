//! Counter-based random number generation.
//!
//! Instead of one mutable generator threaded through the whole simulation,
//! every consumer opens a short-lived stream keyed by
//! `(mission seed, subsystem id, counter...)`. Changing how many values one
//! subsystem draws can never shift another subsystem's sequence, and two
//! detector profiles evaluated against the same `(seed, frame, target)` key
//! face identical randomness — the common-random-numbers property paired
//! comparisons rely on.
//!
//! The generator is splitmix64 started from a hash of the key words. Not
//! cryptographic; statistical quality is plenty for simulation noise.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output mixer (bijective).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Subsystem identifiers; each owns an independent key space under one seed.
pub mod stream {
    pub const GYRO: u64 = 1;
    pub const ACCEL: u64 = 2;
    pub const ULTRASONIC: u64 = 3;
    pub const DETECT: u64 = 4;
    pub const CONFIDENCE: u64 = 5;
    pub const FALSE_POSITIVE: u64 = 6;
}

/// A deterministic stream positioned by its construction key.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    /// Open the stream for `(seed, subsystem, counters...)`.
    pub fn keyed(seed: u64, subsystem: u64, counters: &[u64]) -> Self {
        let mut state = mix64(seed ^ GOLDEN);
        state = mix64(state ^ mix64(subsystem.wrapping_add(GOLDEN)));
        for &c in counters {
            state = mix64(state.rotate_left(23) ^ mix64(c.wrapping_add(GOLDEN)));
        }
        CounterRng { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw; consumes exactly one value regardless of `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `[0, n)`. Modulo bias is negligible for the box
    /// counts used here.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Standard normal via Box-Muller; consumes exactly two values.
    pub fn gaussian(&mut self) -> f64 {
        // Offset keeps u1 strictly positive so ln() is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
