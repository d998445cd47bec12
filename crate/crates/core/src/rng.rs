//! The generator behind every seeded stream in this crate.
//!
//! State update is xorshift64* (Vigna, 2016):
//!
//! ```text
//! x ^= x >> 12
//! x ^= x << 25
//! x ^= x >> 27
//! out = x * 0x2545F4914F6CDD1D   (mod 2^64)
//! ```
//!
//! The 64-bit user seed is expanded into the initial state by one step of
//! SplitMix64 (`z = seed + 0x9E3779B97F4A7C15`, then the two
//! multiply-xorshift rounds); a zero result is replaced by that constant so the
//! state is never zero. Bounded integers use the multiply-high reduction
//! `(out * n) >> 64`, floats take the top 53 bits. All arithmetic is fixed
//! width, so streams are identical on every platform.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(GOLDEN);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Xorshift64Star {
            state: if z == 0 { GOLDEN } else { z },
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform integer in `0..n`. Returns 0 when `n == 0`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Uniform integer in `lo..=hi`.
    pub fn in_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        match (hi - lo).checked_add(1) {
            Some(span) => lo + self.below(span),
            None => self.next_u64(),
        }
    }

    /// Uniform float in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`; `p >= 1` always, `p <= 0` never.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
