//! Minimal seeded generator for reproducible sampling.
//!
//! The CLI promises bit-identical outputs for a given `--seed`, so the
//! generator is pinned here instead of pulled from a crate whose stream
//! could change across releases. SplitMix64 is the usual choice for this:
//! tiny state, full 64-bit period, good enough statistical quality for
//! drawing test instances and kernel sizes.

/// SplitMix64 stream. Same seed, same sequence, on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from [0, 1) with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [lo, hi] inclusive.
    pub fn next_in_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        // Rejection sampling to keep the draw unbiased.
        let zone = u64::MAX - u64::MAX % span;
        loop {
            let v = self.next_u64();
            if v < zone {
                return lo + v % span;
            }
        }
    }
}

/// Random image with independent uniform [0, 1) channels.
pub fn random_image(
    seed: u64,
    height: usize,
    width: usize,
    channels: usize,
) -> crate::types::ImagePlane {
    let mut rng = SplitMix64::new(seed);
    let data = (0..height * width * channels).map(|_| rng.next_unit()).collect();
    crate::types::ImagePlane::new(height, width, channels, data)
        .expect("uniform draws are valid image data")
}

/// Random matte with independent uniform [0, 1) values.
pub fn random_alpha(seed: u64, height: usize, width: usize) -> crate::types::AlphaMatte {
    let mut rng = SplitMix64::new(seed);
    let data = (0..height * width).map(|_| rng.next_unit()).collect();
    crate::types::AlphaMatte::new(height, width, data).expect("uniform draws are valid alpha data")
}

/// Random trimap with labels drawn uniformly from the three states.
pub fn random_trimap(seed: u64, height: usize, width: usize) -> crate::types::Trimap {
    use crate::types::TrimapLabel;
    let mut rng = SplitMix64::new(seed);
    let labels = (0..height * width)
        .map(|_| match rng.next_in_range(0, 2) {
            0 => TrimapLabel::Background,
            1 => TrimapLabel::Unknown,
            _ => TrimapLabel::Foreground,
        })
        .collect();
    crate::types::Trimap::new(height, width, labels).expect("label draws are valid")
}
