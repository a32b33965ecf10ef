//! Trimap generation from alpha mattes via erosion, simulating coarse
//! human labelling: binarize the matte, erode both seed regions, and label
//! whatever survives as known.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::types::{AlphaMatte, Trimap, TrimapLabel};

/// Erosion kernel selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSpec {
    /// Fixed odd kernel size in pixels.
    Fixed(usize),
    /// Uniform draw from [min, max], snapped down to the odd grid so the
    /// structuring element keeps a center pixel. One draw per call.
    UniformRandom { min: usize, max: usize },
}

/// Full trimap-generation recipe.
#[derive(Debug, Clone, Copy)]
pub struct ErosionSpec {
    pub kernel: KernelSpec,
    /// Binarization threshold: alpha >= 1 - delta seeds foreground,
    /// alpha <= delta seeds background. Defaults to 1/255 so only fully
    /// opaque/transparent 8-bit values count as seeds.
    pub binarize_delta: f64,
    pub seed: u64,
}

impl Default for ErosionSpec {
    fn default() -> Self {
        ErosionSpec {
            kernel: KernelSpec::Fixed(3),
            binarize_delta: 1.0 / 255.0,
            seed: 0,
        }
    }
}

impl ErosionSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kernel {
            KernelSpec::Fixed(k) => {
                if k == 0 {
                    return Err(Error::parameter("kernel size must be at least 1"));
                }
                if k.is_multiple_of(2) {
                    return Err(Error::parameter(format!(
                        "kernel size must be odd, got {k}"
                    )));
                }
            }
            KernelSpec::UniformRandom { min, max } => {
                if min == 0 {
                    return Err(Error::parameter("kernel range must start at 1 or above"));
                }
                if min > max {
                    return Err(Error::parameter(format!(
                        "kernel range [{min}, {max}] is empty"
                    )));
                }
            }
        }
        if !(self.binarize_delta > 0.0 && self.binarize_delta < 0.5) {
            return Err(Error::parameter(format!(
                "binarize delta must be in (0, 0.5), got {}",
                self.binarize_delta
            )));
        }
        Ok(())
    }

    /// Resolves the kernel size for one call, drawing if random.
    pub fn draw_kernel(&self) -> usize {
        match self.kernel {
            KernelSpec::Fixed(k) => k,
            KernelSpec::UniformRandom { min, max } => {
                let mut rng = SplitMix64::new(self.seed);
                let drawn = rng.next_in_range(min as u64, max as u64) as usize;
                // Snap even draws down to the odd grid; a uniform draw over
                // [1, 2m] then lands uniformly on {1, 3, ..., 2m - 1}.
                if drawn.is_multiple_of(2) {
                    drawn - 1
                } else {
                    drawn
                }
            }
        }
    }
}

/// Erodes a boolean mask with a k x k square structuring element.
///
/// The output is true where every in-image pixel of the window is true;
/// positions outside the image count as true, so the image frame never
/// erodes the mask by itself. `k` must be odd; `k = 1` is the identity.
pub fn erode_mask(mask: &[bool], height: usize, width: usize, k: usize) -> Result<Vec<bool>> {
    if mask.len() != height * width {
        return Err(Error::data(format!(
            "mask length {} does not match {}x{}",
            mask.len(),
            height,
            width
        )));
    }
    if k == 0 {
        return Err(Error::parameter("kernel size must be at least 1"));
    }
    if k.is_multiple_of(2) {
        return Err(Error::parameter(format!(
            "kernel size must be odd (the window needs a center), got {k}"
        )));
    }
    if k == 1 {
        return Ok(mask.to_vec());
    }

    // A square erosion separates into a horizontal and a vertical pass of
    // 1 x k / k x 1 windows (logical AND commutes with the split).
    let radius = k / 2;
    let mut horizontal = vec![true; height * width];
    for r in 0..height {
        for c in 0..width {
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(width - 1);
            let mut all = true;
            for cc in lo..=hi {
                all &= mask[r * width + cc];
            }
            horizontal[r * width + c] = all;
        }
    }
    let mut out = vec![true; height * width];
    for r in 0..height {
        let lo = r.saturating_sub(radius);
        let hi = (r + radius).min(height - 1);
        for c in 0..width {
            let mut all = true;
            for rr in lo..=hi {
                all &= horizontal[rr * width + c];
            }
            out[r * width + c] = all;
        }
    }
    Ok(out)
}

/// Generates a trimap from a matte: foreground = eroded {alpha >= 1 - delta},
/// background = eroded {alpha <= delta}, unknown = everything else.
///
/// Every pixel with fractional alpha (delta < alpha < 1 - delta) ends up
/// unknown, since erosion only shrinks the seed regions.
pub fn trimap_from_alpha(alpha: &AlphaMatte, spec: &ErosionSpec) -> Result<Trimap> {
    spec.validate()?;
    let (height, width) = (alpha.height(), alpha.width());
    let k = spec.draw_kernel();
    let delta = spec.binarize_delta;

    let fg_seed: Vec<bool> = alpha.data().iter().map(|&v| v >= 1.0 - delta).collect();
    let bg_seed: Vec<bool> = alpha.data().iter().map(|&v| v <= delta).collect();
    let fg = erode_mask(&fg_seed, height, width, k)?;
    let bg = erode_mask(&bg_seed, height, width, k)?;

    let labels = fg
        .iter()
        .zip(&bg)
        .map(|(f, b)| match (f, b) {
            (true, false) => TrimapLabel::Foreground,
            (false, true) => TrimapLabel::Background,
            (false, false) => TrimapLabel::Unknown,
            // Erosion shrinks each seed set and the seeds are disjoint for
            // delta < 0.5, so this arm is unreachable.
            (true, true) => unreachable!("eroded seed regions overlap"),
        })
        .collect();
    Trimap::new(height, width, labels)
}
