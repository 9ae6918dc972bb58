//! Deterministic randomness.
//!
//! Every random choice in the crate flows through a splitmix64 stream so that
//! identical seeds reproduce identical trees, configurations and reports
//! bit-for-bit across platforms and runs.

/// splitmix64 stream (Steele, Lea, Flood 2014). State advances by the golden
/// gamma; outputs are the finalised mix of the state.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0,1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in the inclusive range [lo, hi] by modulo reduction. The
    /// ranges used here span a handful of values, so the modulo bias is
    /// below 2^-60 and irrelevant next to reproducibility.
    pub fn next_in_range(&mut self, lo: u32, hi: u32) -> u32 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as u32
    }

    /// Bernoulli draw against a linear-domain threshold.
    pub fn next_bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
