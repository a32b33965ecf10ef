//! Matting evaluation metrics: SAD, MAD, MSE, Grad, Conn, and their
//! transition-restricted variants SAD-T / MSE-T.
//!
//! Scale conventions, pinned for reproducibility: SAD, Grad and Conn are
//! sums divided by 1000; MAD and MSE are plain means. Grad uses first-order
//! Gaussian-derivative filters with sigma = 1.4, radius ceil(3 sigma) = 5
//! and reflected borders. Conn thresholds at 0.1 steps with 4-connected
//! components and the 0.15 soft-distance knee.

use serde::{Deserialize, Serialize};

use crate::error::{check_same_dims, Error, Result};
use crate::types::{AlphaMatte, Trimap};

/// Pixelwise comparison over an optional region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMetrics {
    /// Sum of absolute differences, divided by 1000.
    pub sad: f64,
    /// Mean absolute difference.
    pub mad: f64,
    /// Mean squared error.
    pub mse: f64,
}

/// Full metric report as produced by [`evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sad: f64,
    pub mad: f64,
    pub mse: f64,
    /// Absent when the image is smaller than the gradient filter support.
    pub grad: Option<f64>,
    pub conn: f64,
    /// Absent when the trimap has no unknown region.
    pub sad_t: Option<f64>,
    /// Absent when the trimap has no unknown region.
    pub mse_t: Option<f64>,
    pub total_pixels: usize,
    pub unknown_pixels: usize,
}

fn check_matte_dims(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<()> {
    check_same_dims((pred.height(), pred.width()), (gt.height(), gt.width()))
}

/// SAD / MAD / MSE over `region` (all pixels when absent).
pub fn pixel_metrics(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    region: Option<&[bool]>,
) -> Result<PixelMetrics> {
    check_matte_dims(pred, gt)?;
    let n = pred.pixel_count();
    if let Some(mask) = region {
        if mask.len() != n {
            return Err(Error::data(format!(
                "region mask length {} does not match {} pixels",
                mask.len(),
                n
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::DegenerateInput("empty metric region".into()));
        }
    }

    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        if region.is_none_or(|m| m[i]) {
            let d = pred.data()[i] - gt.data()[i];
            abs_sum += d.abs();
            sq_sum += d * d;
            count += 1;
        }
    }
    Ok(PixelMetrics {
        sad: abs_sum / 1000.0,
        mad: abs_sum / count as f64,
        mse: sq_sum / count as f64,
    })
}

const GRAD_SIGMA: f64 = 1.4;
const GRAD_RADIUS: usize = 5; // ceil(3 * 1.4)

/// Sampled Gaussian and its derivative, both scaled by the Gaussian's sum
/// so a unit-slope ramp maps to a unit-magnitude response.
pub(crate) fn gaussian_kernels() -> (Vec<f64>, Vec<f64>) {
    let r = GRAD_RADIUS as isize;
    let mut smooth = Vec::with_capacity(2 * GRAD_RADIUS + 1);
    let mut deriv = Vec::with_capacity(2 * GRAD_RADIUS + 1);
    for i in -r..=r {
        let x = i as f64;
        let g = (-x * x / (2.0 * GRAD_SIGMA * GRAD_SIGMA)).exp();
        smooth.push(g);
        deriv.push(-x / (GRAD_SIGMA * GRAD_SIGMA) * g);
    }
    let sum: f64 = smooth.iter().sum();
    for v in smooth.iter_mut() {
        *v /= sum;
    }
    for v in deriv.iter_mut() {
        *v /= sum;
    }
    (smooth, deriv)
}

/// Symmetric border reflection with edge duplication (`dcb|abcd|cba`).
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable correlation: `row_kernel` along x, then `col_kernel` along y.
fn separable_filter(
    data: &[f64],
    height: usize,
    width: usize,
    row_kernel: &[f64],
    col_kernel: &[f64],
) -> Vec<f64> {
    let r = (row_kernel.len() / 2) as isize;
    let mut horizontal = vec![0.0; height * width];
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (t, k) in row_kernel.iter().enumerate() {
                let cc = reflect_index(col as isize + t as isize - r, width);
                acc += k * data[row * width + cc];
            }
            horizontal[row * width + col] = acc;
        }
    }
    let mut out = vec![0.0; height * width];
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (t, k) in col_kernel.iter().enumerate() {
                let rr = reflect_index(row as isize + t as isize - r, height);
                acc += k * horizontal[rr * width + col];
            }
            out[row * width + col] = acc;
        }
    }
    out
}

pub(crate) fn gradient_magnitude(matte: &AlphaMatte) -> Vec<f64> {
    let (smooth, deriv) = gaussian_kernels();
    let (h, w) = (matte.height(), matte.width());
    let gx = separable_filter(matte.data(), h, w, &deriv, &smooth);
    let gy = separable_filter(matte.data(), h, w, &smooth, &deriv);
    gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect()
}

/// Gradient error: the squared difference of Gaussian-derivative gradient
/// magnitudes, summed and divided by 1000. Sensitive to over-smoothing of
/// fine structures.
pub fn grad_metric(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64> {
    check_matte_dims(pred, gt)?;
    let support = 2 * GRAD_RADIUS + 1;
    if pred.height() < support || pred.width() < support {
        return Err(Error::DegenerateInput(format!(
            "image {}x{} is smaller than the {support}x{support} gradient filter support",
            pred.height(),
            pred.width()
        )));
    }
    let mp = gradient_magnitude(pred);
    let mg = gradient_magnitude(gt);
    let sum: f64 = mp
        .iter()
        .zip(&mg)
        .map(|(p, g)| {
            let d = p - g;
            d * d
        })
        .sum();
    Ok(sum / 1000.0)
}

/// Largest 4-connected component of `mask`, ties broken by the smallest
/// minimum linear pixel index. Returns a membership mask; `None` when the
/// input mask is empty.
fn largest_component(mask: &[bool], height: usize, width: usize) -> Option<Vec<bool>> {
    let n = height * width;
    let mut label = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut mins: Vec<usize> = Vec::new();
    let mut queue = Vec::new();

    for start in 0..n {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0usize;
        queue.push(start);
        label[start] = id;
        while let Some(p) = queue.pop() {
            size += 1;
            let (r, c) = (p / width, p % width);
            let mut visit = |q: usize| {
                if mask[q] && label[q] == usize::MAX {
                    label[q] = id;
                    queue.push(q);
                }
            };
            if r > 0 {
                visit(p - width);
            }
            if r + 1 < height {
                visit(p + width);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < width {
                visit(p + 1);
            }
        }
        sizes.push(size);
        mins.push(start); // BFS scans in index order, so `start` is the component minimum.
    }

    if sizes.is_empty() {
        return None;
    }
    let mut best = 0;
    for id in 1..sizes.len() {
        if sizes[id] > sizes[best] || (sizes[id] == sizes[best] && mins[id] < mins[best]) {
            best = id;
        }
    }
    Some(label.iter().map(|&l| l == best).collect())
}

/// Connectivity error: how far each pixel's value sits above the largest
/// threshold at which it still belongs to the jointly-connected source
/// region, compared between prediction and ground truth. Sum divided by
/// 1000. Grows with detached artifacts and holes.
pub fn conn_metric(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64> {
    check_matte_dims(pred, gt)?;
    let (h, w) = (pred.height(), pred.width());
    let n = pred.pixel_count();

    let mut level = vec![0.0f64; n];
    for step in 1..=10 {
        let theta = step as f64 / 10.0;
        let mask: Vec<bool> = (0..n)
            .map(|i| pred.data()[i] >= theta && gt.data()[i] >= theta)
            .collect();
        if let Some(omega) = largest_component(&mask, h, w) {
            for (l, inside) in level.iter_mut().zip(&omega) {
                if *inside {
                    *l = theta;
                }
            }
        }
    }

    let knee = |d: f64| if d >= 0.15 { 1.0 - d } else { 1.0 };
    let sum: f64 = (0..n)
        .map(|i| {
            let phi_pred = knee(pred.data()[i] - level[i]);
            let phi_gt = knee(gt.data()[i] - level[i]);
            (phi_pred - phi_gt).abs()
        })
        .sum();
    Ok(sum / 1000.0)
}

/// Whole-image metrics plus the transition-restricted SAD-T / MSE-T over
/// the trimap's unknown region. `grad` is absent for images below the
/// filter support; SAD-T / MSE-T are absent when no unknown region exists.
pub fn evaluate(pred: &AlphaMatte, gt: &AlphaMatte, trimap: &Trimap) -> Result<MetricReport> {
    check_matte_dims(pred, gt)?;
    crate::types::check_matte_trimap_dims(pred, trimap)?;

    let whole = pixel_metrics(pred, gt, None)?;
    let grad = match grad_metric(pred, gt) {
        Ok(v) => Some(v),
        Err(Error::DegenerateInput(_)) => None,
        Err(e) => return Err(e),
    };
    let conn = conn_metric(pred, gt)?;

    let masks = crate::types::region_masks(trimap);
    let (sad_t, mse_t) = if masks.unknown.iter().any(|&u| u) {
        let t = pixel_metrics(pred, gt, Some(&masks.unknown))?;
        (Some(t.sad), Some(t.mse))
    } else {
        (None, None)
    };

    Ok(MetricReport {
        sad: whole.sad,
        mad: whole.mad,
        mse: whole.mse,
        grad,
        conn,
        sad_t,
        mse_t,
        total_pixels: pred.pixel_count(),
        unknown_pixels: trimap.unknown_count(),
    })
}
