//! PNG loading and saving with the byte conventions of the tool:
//! 8-bit gray or RGB images in, strict {0, 128, 255} trimaps, 8- or 16-bit
//! grayscale alphas out. All writes go through a temp file and rename so a
//! crash never leaves a half-written output.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};
use matte::types::{quantize_alpha, TrimapLabel};
use matte::{AlphaMatte, ImagePlane, Trimap};

use crate::CliError;

fn open(path: &Path) -> Result<DynamicImage, CliError> {
    image::open(path)
        .map_err(|e| CliError::io(format!("cannot read '{}': {e}", path.display())))
}

/// Loads an 8-bit grayscale or RGB PNG as a unit-interval image.
pub fn load_image(path: &Path) -> Result<ImagePlane, CliError> {
    let (height, width, channels, data) = match open(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            let data = img.into_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
            (h as usize, w as usize, 1, data)
        }
        DynamicImage::ImageRgb8(img) => {
            let (w, h) = img.dimensions();
            let data = img.into_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
            (h as usize, w as usize, 3, data)
        }
        other => {
            return Err(CliError::io(format!(
                "'{}' must be an 8-bit grayscale or RGB image, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    ImagePlane::new(height, width, channels, data).map_err(CliError::from)
}

/// Loads an 8- or 16-bit grayscale PNG as an alpha matte.
pub fn load_alpha(path: &Path) -> Result<AlphaMatte, CliError> {
    let (height, width, data) = match open(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            let data = img.into_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
            (h as usize, w as usize, data)
        }
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            let data = img.into_raw().iter().map(|&v| f64::from(v) / 65535.0).collect();
            (h as usize, w as usize, data)
        }
        other => {
            return Err(CliError::io(format!(
                "'{}' must be a grayscale alpha image, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    AlphaMatte::new(height, width, data).map_err(CliError::from)
}

/// Loads a trimap PNG. Bytes must be exactly 0, 128 or 255; anything else
/// is a hard error, never coerced.
pub fn load_trimap(path: &Path) -> Result<Trimap, CliError> {
    match open(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            let labels = img
                .as_raw()
                .iter()
                .map(|&b| TrimapLabel::from_byte(b))
                .collect::<matte::Result<Vec<_>>>()
                .map_err(|e| CliError::io(format!("'{}': {e}", path.display())))?;
            Trimap::new(h as usize, w as usize, labels).map_err(CliError::from)
        }
        other => Err(CliError::io(format!(
            "'{}' must be an 8-bit grayscale trimap, got {:?}",
            path.display(),
            other.color()
        ))),
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::io(format!("cannot write '{}': {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::io(format!("cannot move output into '{}': {e}", path.display())))
}

fn encode_png(img: DynamicImage) -> Result<Vec<u8>, CliError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| CliError::io(format!("PNG encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

/// Writes a matte as grayscale PNG: 8-bit by default, 16-bit when `deep`.
pub fn save_alpha(path: &Path, matte: &AlphaMatte, deep: bool) -> Result<(), CliError> {
    let (w, h) = (matte.width() as u32, matte.height() as u32);
    let img = if deep {
        let data: Vec<u16> = matte.data().iter().map(|v| (v * 65535.0).round() as u16).collect();
        DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, data).expect("sized buffer"),
        )
    } else {
        DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, quantize_alpha(matte)).expect("sized buffer"),
        )
    };
    atomic_write(path, &encode_png(img)?)
}

pub fn save_trimap(path: &Path, trimap: &Trimap) -> Result<(), CliError> {
    let (w, h) = (trimap.width() as u32, trimap.height() as u32);
    let data: Vec<u8> = trimap.labels().iter().map(|l| l.to_byte()).collect();
    let img = DynamicImage::ImageLuma8(
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).expect("sized buffer"),
    );
    atomic_write(path, &encode_png(img)?)
}

/// Writes a unit-interval image as an 8-bit gray or RGB PNG.
pub fn save_image(path: &Path, plane: &ImagePlane) -> Result<(), CliError> {
    let (w, h) = (plane.width() as u32, plane.height() as u32);
    let bytes: Vec<u8> = plane.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    let img = match plane.channels() {
        1 => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).expect("sized buffer"),
        ),
        _ => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).expect("sized buffer"),
        ),
    };
    atomic_write(path, &encode_png(img)?)
}
