//! Core grid types shared by every module: images, alpha mattes, trimaps,
//! and the byte quantization / region-mask utilities around them.
//!
//! All scalar data is stored as `f64` in the unit interval, row-major.
//! Values are validated once at construction; after that the types are
//! immutable and safe to share across threads.

use crate::error::{check_same_dims, Error, Result};

/// An H x W x C scalar field with values in [0, 1]. C is 1 (gray) or 3 (RGB).
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    /// Builds an image from row-major, channel-interleaved data.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::parameter("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::parameter(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::data(format!(
                "expected {} values for a {}x{}x{} image, got {}",
                height * width * channels,
                height,
                width,
                channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("image value {v} outside [0, 1]")));
        }
        Ok(ImagePlane {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        ImagePlane::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels (not scalar values).
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel slice of the pixel at linear index `i`.
    pub fn pixel(&self, i: usize) -> &[f64] {
        let base = i * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }
}

/// An H x W opacity field with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl AlphaMatte {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::parameter("matte dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::data(format!(
                "expected {} values for a {}x{} matte, got {}",
                height * width,
                height,
                width,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("alpha value {v} outside [0, 1]")));
        }
        Ok(AlphaMatte {
            height,
            width,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        AlphaMatte::new(height, width, vec![value; height * width])
    }

    /// Skips the range validation. For internal callers whose data is
    /// already clamped, or deliberately outside [0, 1] (finite-difference
    /// probes evaluate the loss formulas slightly past the domain).
    pub(crate) fn unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        AlphaMatte {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Three-state coarse label of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimapLabel {
    Background,
    Unknown,
    Foreground,
}

impl TrimapLabel {
    /// Byte encoding used by trimap PNG files.
    pub fn to_byte(self) -> u8 {
        match self {
            TrimapLabel::Background => 0,
            TrimapLabel::Unknown => 128,
            TrimapLabel::Foreground => 255,
        }
    }

    /// Strict inverse of [`TrimapLabel::to_byte`]; any other byte is an error.
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(TrimapLabel::Background),
            128 => Ok(TrimapLabel::Unknown),
            255 => Ok(TrimapLabel::Foreground),
            other => Err(Error::data(format!(
                "trimap byte {other} is not one of 0, 128, 255"
            ))),
        }
    }
}

/// An H x W field of coarse labels; the supervision input of the solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimap {
    height: usize,
    width: usize,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn new(height: usize, width: usize, labels: Vec<TrimapLabel>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::parameter("trimap dimensions must be positive"));
        }
        if labels.len() != height * width {
            return Err(Error::data(format!(
                "expected {} labels for a {}x{} trimap, got {}",
                height * width,
                height,
                width,
                labels.len()
            )));
        }
        Ok(Trimap {
            height,
            width,
            labels,
        })
    }

    pub fn constant(height: usize, width: usize, label: TrimapLabel) -> Result<Self> {
        Trimap::new(height, width, vec![label; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn labels(&self) -> &[TrimapLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> TrimapLabel {
        self.labels[i]
    }

    /// Supervision target of pixel `i`: 1 on foreground, 0 on background,
    /// none on unknown.
    pub fn target(&self, i: usize) -> Option<f64> {
        match self.labels[i] {
            TrimapLabel::Foreground => Some(1.0),
            TrimapLabel::Background => Some(0.0),
            TrimapLabel::Unknown => None,
        }
    }

    /// Number of known (foreground + background) pixels.
    pub fn known_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| !matches!(l, TrimapLabel::Unknown))
            .count()
    }

    pub fn unknown_count(&self) -> usize {
        self.pixel_count() - self.known_count()
    }
}

/// Boolean partition of the pixel grid into foreground, background and
/// unknown regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMasks {
    pub fg: Vec<bool>,
    pub bg: Vec<bool>,
    pub unknown: Vec<bool>,
}

/// Splits a trimap into its three region masks. The masks always partition
/// the grid: each pixel is true in exactly one of them.
pub fn region_masks(trimap: &Trimap) -> RegionMasks {
    let n = trimap.pixel_count();
    let mut fg = vec![false; n];
    let mut bg = vec![false; n];
    let mut unknown = vec![false; n];
    for (i, label) in trimap.labels().iter().enumerate() {
        match label {
            TrimapLabel::Foreground => fg[i] = true,
            TrimapLabel::Background => bg[i] = true,
            TrimapLabel::Unknown => unknown[i] = true,
        }
    }
    RegionMasks { fg, bg, unknown }
}

/// Maps a matte to 8-bit grayscale with round-half-up, so 0.5 lands on 128
/// like the trimap byte convention.
pub fn quantize_alpha(matte: &AlphaMatte) -> Vec<u8> {
    // f64::round is round-half-away-from-zero; for non-negative input that
    // is exactly round-half-up.
    matte.data().iter().map(|v| (v * 255.0).round() as u8).collect()
}

/// Inverse of [`quantize_alpha`]: byte b maps back to b/255.
pub fn dequantize_alpha(height: usize, width: usize, bytes: &[u8]) -> Result<AlphaMatte> {
    let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
    AlphaMatte::new(height, width, data)
}

pub(crate) fn check_image_matte_dims(image: &ImagePlane, matte: &AlphaMatte) -> Result<()> {
    check_same_dims(
        (image.height(), image.width()),
        (matte.height(), matte.width()),
    )
}

pub(crate) fn check_matte_trimap_dims(matte: &AlphaMatte, trimap: &Trimap) -> Result<()> {
    check_same_dims(
        (matte.height(), matte.width()),
        (trimap.height(), trimap.width()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_channel_count() {
        assert!(ImagePlane::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(ImagePlane::new(2, 2, 4, vec![0.0; 16]).is_err());
    }

    #[test]
    fn image_rejects_out_of_range_values() {
        assert!(ImagePlane::new(1, 2, 1, vec![0.5, 1.5]).is_err());
        assert!(ImagePlane::new(1, 2, 1, vec![-0.1, 0.5]).is_err());
    }

    #[test]
    fn image_rejects_wrong_length() {
        assert!(ImagePlane::new(2, 2, 3, vec![0.0; 11]).is_err());
    }

    #[test]
    fn quantize_endpoints_and_midpoint() {
        let m = AlphaMatte::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(quantize_alpha(&m), vec![0, 128, 255]);
    }

    #[test]
    fn quantize_dequantize_error_bounded() {
        // 1/510 is the worst case of rounding to a 1/255 grid.
        let vals: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let m = AlphaMatte::new(10, 10, vals.clone()).unwrap();
        let q = quantize_alpha(&m);
        let d = dequantize_alpha(10, 10, &q).unwrap();
        for (orig, round_tripped) in vals.iter().zip(d.data()) {
            assert!((orig - round_tripped).abs() <= 1.0 / 510.0 + 1e-15);
        }
    }

    #[test]
    fn region_masks_all_foreground() {
        let t = Trimap::constant(2, 2, TrimapLabel::Foreground).unwrap();
        let m = region_masks(&t);
        assert!(m.fg.iter().all(|&v| v));
        assert!(m.bg.iter().all(|&v| !v));
        assert!(m.unknown.iter().all(|&v| !v));
    }

    #[test]
    fn region_masks_all_unknown() {
        let t = Trimap::constant(3, 1, TrimapLabel::Unknown).unwrap();
        let m = region_masks(&t);
        assert!(m.unknown.iter().all(|&v| v));
    }

    #[test]
    fn region_masks_mixed_row() {
        let t = Trimap::new(
            1,
            3,
            vec![
                TrimapLabel::Foreground,
                TrimapLabel::Unknown,
                TrimapLabel::Background,
            ],
        )
        .unwrap();
        let m = region_masks(&t);
        assert_eq!(m.fg, vec![true, false, false]);
        assert_eq!(m.unknown, vec![false, true, false]);
        assert_eq!(m.bg, vec![false, false, true]);
    }

    #[test]
    fn region_masks_always_partition() {
        for seed in 0..50 {
            let t = crate::rng::random_trimap(seed, 6, 7);
            let m = region_masks(&t);
            for i in 0..t.pixel_count() {
                let set = m.fg[i] as u8 + m.bg[i] as u8 + m.unknown[i] as u8;
                assert_eq!(set, 1, "pixel {i} is in {set} masks");
            }
        }
    }

    #[test]
    fn trimap_byte_round_trip_is_strict() {
        for label in [
            TrimapLabel::Background,
            TrimapLabel::Unknown,
            TrimapLabel::Foreground,
        ] {
            assert_eq!(TrimapLabel::from_byte(label.to_byte()).unwrap(), label);
        }
        assert!(TrimapLabel::from_byte(127).is_err());
        assert!(TrimapLabel::from_byte(1).is_err());
    }

}
