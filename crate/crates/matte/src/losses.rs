//! Supervision losses over the alpha matte and their exact subgradients.
//!
//! Four losses are provided:
//!
//! * **known loss** — per-pixel penalty (l1 or BCE) against the trimap's
//!   known labels;
//! * **affinity loss** — mean |sum_j A(i,j) alpha_j - alpha_i| over the
//!   row-normalized similarity weights;
//! * **DC loss** — per selected pair, | |alpha_i - alpha_j| - d_ij |: the
//!   alpha distance must replicate the color distance;
//! * **DDC loss** — per selected pair, |alpha_i - alpha_j - d_ij|: the
//!   signed variant that coexists with constant known regions.
//!
//! All losses are piecewise linear in alpha. Subgradients at kinks are
//! taken as 0 (sign(0) = 0). Gradients do not flow through the neighbor
//! selection or the color distances: both depend only on the image, which
//! is fixed.
//!
//! Evaluation is deterministic for any worker count: values are reduced
//! over per-pixel partial sums in pixel order, and each gradient component
//! is gathered independently through the field's reverse adjacency.

use rayon::prelude::*;

use crate::error::{check_same_dims, Error, Result};
use crate::neighbors::{AffinityWeights, NeighborField};
use crate::types::{AlphaMatte, Trimap, TrimapLabel};

/// How a pair-term sum is turned into a scalar loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizationMode {
    /// Mean over all (center, neighbor) terms. This matches reference
    /// unfold/top-k implementations that take an l1 mean over the gathered
    /// tensor, and is the default the lambda = 10 weighting assumes.
    #[default]
    Reference,
    /// Per-pixel form: the inner neighbor sums are left intact and the
    /// outer sum is divided by the pixel count N. On fields with uniform
    /// list length k this is exactly k times the Reference value.
    PerPixel,
}

/// Penalty applied to known-pixel deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    #[default]
    L1,
    /// Binary cross entropy with the prediction clamped to
    /// [epsilon, 1 - epsilon].
    Bce,
}

/// Which pixels the known loss supervises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Only trimap foreground/background pixels, with targets 1/0.
    #[default]
    TrimapKnownOnly,
    /// Every pixel, against the binarized label (unknown rounds up to 1).
    /// Mimics training against a segmentation mask instead of a trimap.
    MaskAllPixels,
}

/// Configuration of the known loss.
#[derive(Debug, Clone, Copy)]
pub struct KnownLossSpec {
    pub penalty: Penalty,
    pub label_mode: LabelMode,
    /// Clamp for BCE, in (0, 0.5).
    pub bce_epsilon: f64,
}

impl Default for KnownLossSpec {
    fn default() -> Self {
        KnownLossSpec {
            penalty: Penalty::L1,
            label_mode: LabelMode::TrimapKnownOnly,
            bce_epsilon: 1e-6,
        }
    }
}

impl KnownLossSpec {
    pub fn validate(&self) -> Result<()> {
        // Negated comparison so a NaN epsilon is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.bce_epsilon > 0.0 && self.bce_epsilon < 0.5) {
            return Err(Error::parameter(format!(
                "BCE epsilon must be in (0, 0.5), got {}",
                self.bce_epsilon
            )));
        }
        Ok(())
    }
}

/// A loss value together with its gradient field.
#[derive(Debug, Clone)]
pub struct LossResult {
    /// Non-negative scalar loss.
    pub value: f64,
    /// d loss / d alpha_i, row-major, same shape as the matte.
    pub gradient: Vec<f64>,
    /// Set when the supervision set was empty (e.g. an all-unknown trimap
    /// in `TrimapKnownOnly` mode); the value and gradient are then zero.
    pub degenerate: bool,
}

impl LossResult {
    fn zero(n: usize) -> Self {
        LossResult {
            value: 0.0,
            gradient: vec![0.0; n],
            degenerate: false,
        }
    }

    pub fn max_abs_gradient(&self) -> f64 {
        self.gradient.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

/// sign with sign(0) = 0; the subgradient convention at kinks.
pub(crate) fn sub_sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact sign for `eps = 0`, otherwise the clamped ramp x/eps: the
/// derivative of the Huber-style smoothing of |x|. The solver descends
/// along softened directions because exact sign votes can deadlock on
/// scenes with many tied colors (a pixel nudged off a zero-distance
/// consensus is outvoted back before coordinated moves can happen), while
/// the softened forces stay proportional near kinks and let whole regions
/// move together.
pub(crate) fn soft_sign(x: f64, eps: f64) -> f64 {
    if eps <= 0.0 {
        sub_sign(x)
    } else {
        (x / eps).clamp(-1.0, 1.0)
    }
}

fn binarized_target(label: TrimapLabel) -> f64 {
    match label {
        TrimapLabel::Foreground | TrimapLabel::Unknown => 1.0,
        TrimapLabel::Background => 0.0,
    }
}

/// Known loss: mean penalty over the supervised pixels.
///
/// In the default l1/known-only mode this is
/// (1/N_known) sum_{i in known} |alpha_i - t_i|, which equals the
/// whole-image mean scaled by s = N / N_known. An empty supervision set
/// yields a zero result with the `degenerate` flag set.
pub fn known_loss(alpha: &AlphaMatte, trimap: &Trimap, spec: &KnownLossSpec) -> Result<LossResult> {
    known_loss_impl(alpha, trimap, spec, 0.0)
}

/// Known loss with a softened l1 subgradient; the value is unchanged.
pub(crate) fn known_loss_smoothed(
    alpha: &AlphaMatte,
    trimap: &Trimap,
    spec: &KnownLossSpec,
    eps: f64,
) -> Result<LossResult> {
    known_loss_impl(alpha, trimap, spec, eps)
}

fn known_loss_impl(
    alpha: &AlphaMatte,
    trimap: &Trimap,
    spec: &KnownLossSpec,
    eps: f64,
) -> Result<LossResult> {
    crate::types::check_matte_trimap_dims(alpha, trimap)?;
    spec.validate()?;

    let n = alpha.pixel_count();
    let count = match spec.label_mode {
        LabelMode::TrimapKnownOnly => trimap.known_count(),
        LabelMode::MaskAllPixels => n,
    };
    if count == 0 {
        return Ok(LossResult {
            degenerate: true,
            ..LossResult::zero(n)
        });
    }

    let inv = 1.0 / count as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; n];
    #[allow(clippy::needless_range_loop)] // indexes labels, alpha and gradient together
    for i in 0..n {
        let target = match spec.label_mode {
            LabelMode::TrimapKnownOnly => match trimap.target(i) {
                Some(t) => t,
                None => continue,
            },
            LabelMode::MaskAllPixels => binarized_target(trimap.label(i)),
        };
        let a = alpha.data()[i];
        match spec.penalty {
            Penalty::L1 => {
                value += (a - target).abs();
                gradient[i] = soft_sign(a - target, eps) * inv;
            }
            Penalty::Bce => {
                let eps = spec.bce_epsilon;
                let clamped = a.clamp(eps, 1.0 - eps);
                value -= target * clamped.ln() + (1.0 - target) * (1.0 - clamped).ln();
                gradient[i] = if a > eps && a < 1.0 - eps {
                    (-target / clamped + (1.0 - target) / (1.0 - clamped)) * inv
                } else {
                    // Inside the clamp the loss is locally constant in a.
                    0.0
                };
            }
        }
    }

    Ok(LossResult {
        value: value * inv,
        gradient,
        degenerate: false,
    })
}

fn check_alpha_field_dims(alpha: &AlphaMatte, field: &NeighborField) -> Result<()> {
    check_same_dims(
        (field.height(), field.width()),
        (alpha.height(), alpha.width()),
    )
}

/// Nonlocal residual of pixel `i`: sum_j w_ij (alpha_j - alpha_i).
///
/// Evaluated pairwise rather than as (sum_j w_ij alpha_j) - alpha_i so a
/// constant matte gives a residual of exactly zero regardless of how the
/// row normalization rounded.
fn affinity_residuals(
    alpha: &AlphaMatte,
    field: &NeighborField,
    weights: &AffinityWeights,
) -> Vec<f64> {
    let a = alpha.data();
    (0..field.pixel_count())
        .into_par_iter()
        .map(|i| {
            let range = field.entry_range(i);
            let w = &weights.as_slice()[range.clone()];
            let mut res = 0.0;
            for (e, &wj) in field.row(i).iter().zip(w) {
                let aj = e.neighbor().map_or(0.0, |j| a[j]);
                res += wj * (aj - a[i]);
            }
            res
        })
        .collect()
}

/// Affinity loss (the nonlocal principle as a loss):
/// (1/N) sum_i |sum_j A(i,j) alpha_j - alpha_i|.
///
/// Both normalization modes divide by N here; the parameter exists for
/// interface uniformity with the pair losses.
pub fn affinity_loss(
    alpha: &AlphaMatte,
    field: &NeighborField,
    weights: &AffinityWeights,
    mode: NormalizationMode,
) -> Result<LossResult> {
    affinity_loss_impl(alpha, field, weights, mode, 0.0)
}

/// Affinity loss with a softened subgradient; the value is unchanged.
pub(crate) fn affinity_loss_smoothed(
    alpha: &AlphaMatte,
    field: &NeighborField,
    weights: &AffinityWeights,
    mode: NormalizationMode,
    eps: f64,
) -> Result<LossResult> {
    affinity_loss_impl(alpha, field, weights, mode, eps)
}

fn affinity_loss_impl(
    alpha: &AlphaMatte,
    field: &NeighborField,
    weights: &AffinityWeights,
    _mode: NormalizationMode,
    eps: f64,
) -> Result<LossResult> {
    check_alpha_field_dims(alpha, field)?;
    let n = field.pixel_count();
    let inv = 1.0 / n as f64;

    let residuals = affinity_residuals(alpha, field, weights);
    let value = residuals.iter().map(|r| r.abs()).sum::<f64>() * inv;

    let gradient: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut g = 0.0;
            // Terms where p is the selected neighbor of some center i.
            for &(center, flat_idx) in field.reverse_row(p) {
                g += soft_sign(residuals[center as usize], eps) * weights.get(flat_idx);
            }
            // Terms of p's own row: each w (alpha_j - alpha_p) contributes
            // -w to the derivative in alpha_p.
            let s = soft_sign(residuals[p], eps);
            if s != 0.0 {
                let range = field.entry_range(p);
                let row_weight: f64 = weights.as_slice()[range].iter().sum();
                g -= s * row_weight;
            }
            g * inv
        })
        .collect();

    Ok(LossResult {
        value,
        gradient,
        degenerate: false,
    })
}

fn pair_norm(field: &NeighborField, mode: NormalizationMode) -> f64 {
    match mode {
        NormalizationMode::Reference => field.total_entries() as f64,
        NormalizationMode::PerPixel => field.pixel_count() as f64,
    }
}

/// Distance consistency loss: per selected pair,
/// | |alpha_i - alpha_j| - d_ij |.
pub fn dc_loss(
    alpha: &AlphaMatte,
    field: &NeighborField,
    mode: NormalizationMode,
) -> Result<LossResult> {
    dc_loss_impl(alpha, field, mode, 0.0)
}

/// DC loss with a softened subgradient; the value is unchanged.
pub(crate) fn dc_loss_smoothed(
    alpha: &AlphaMatte,
    field: &NeighborField,
    mode: NormalizationMode,
    eps: f64,
) -> Result<LossResult> {
    dc_loss_impl(alpha, field, mode, eps)
}

fn dc_loss_impl(
    alpha: &AlphaMatte,
    field: &NeighborField,
    mode: NormalizationMode,
    eps: f64,
) -> Result<LossResult> {
    check_alpha_field_dims(alpha, field)?;
    let n = field.pixel_count();
    let a = alpha.data();
    let inv = 1.0 / pair_norm(field, mode);

    let per_pixel: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            field
                .row(i)
                .iter()
                .map(|e| {
                    let aj = e.neighbor().map_or(0.0, |j| a[j]);
                    ((a[i] - aj).abs() - e.distance()).abs()
                })
                .sum()
        })
        .collect();
    let value = per_pixel.iter().sum::<f64>() * inv;

    let gradient: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut g = 0.0;
            for e in field.row(p) {
                let aj = e.neighbor().map_or(0.0, |j| a[j]);
                let delta = a[p] - aj;
                g += soft_sign(delta.abs() - e.distance(), eps) * soft_sign(delta, eps);
            }
            for &(center, flat_idx) in field.reverse_row(p) {
                let e = field.entry(flat_idx);
                let delta = a[center as usize] - a[p];
                g -= soft_sign(delta.abs() - e.distance(), eps) * soft_sign(delta, eps);
            }
            g * inv
        })
        .collect();

    Ok(LossResult {
        value,
        gradient,
        degenerate: false,
    })
}

/// Directional distance consistency loss: per selected pair,
/// |alpha_i - alpha_j - d_ij| with i the window center.
///
/// Keeping the sign of the alpha distance gives every mutual pair the
/// plateau minimum 2 d_ij, reached whenever |alpha_i - alpha_j| <= d_ij,
/// so constant known regions no longer fight the prior.
pub fn ddc_loss(
    alpha: &AlphaMatte,
    field: &NeighborField,
    mode: NormalizationMode,
) -> Result<LossResult> {
    ddc_loss_impl(alpha, field, mode, 0.0)
}

/// DDC loss with a softened subgradient; the value is unchanged.
pub(crate) fn ddc_loss_smoothed(
    alpha: &AlphaMatte,
    field: &NeighborField,
    mode: NormalizationMode,
    eps: f64,
) -> Result<LossResult> {
    ddc_loss_impl(alpha, field, mode, eps)
}

fn ddc_loss_impl(
    alpha: &AlphaMatte,
    field: &NeighborField,
    mode: NormalizationMode,
    eps: f64,
) -> Result<LossResult> {
    check_alpha_field_dims(alpha, field)?;
    let n = field.pixel_count();
    let a = alpha.data();
    let inv = 1.0 / pair_norm(field, mode);

    let per_pixel: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            field
                .row(i)
                .iter()
                .map(|e| {
                    let aj = e.neighbor().map_or(0.0, |j| a[j]);
                    (a[i] - aj - e.distance()).abs()
                })
                .sum()
        })
        .collect();
    let value = per_pixel.iter().sum::<f64>() * inv;

    let gradient: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut g = 0.0;
            for e in field.row(p) {
                let aj = e.neighbor().map_or(0.0, |j| a[j]);
                g += soft_sign(a[p] - aj - e.distance(), eps);
            }
            for &(center, flat_idx) in field.reverse_row(p) {
                let e = field.entry(flat_idx);
                g -= soft_sign(a[center as usize] - a[p] - e.distance(), eps);
            }
            g * inv
        })
        .collect();

    Ok(LossResult {
        value,
        gradient,
        degenerate: false,
    })
}

/// Total training loss: known loss + lambda * DDC loss. The known loss
/// sees only known pixels; the DDC loss supervises the whole matte.
pub fn total_loss(
    alpha: &AlphaMatte,
    trimap: &Trimap,
    field: &NeighborField,
    lambda: f64,
    known_spec: &KnownLossSpec,
    mode: NormalizationMode,
) -> Result<LossResult> {
    // Negated comparison so a NaN lambda is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(lambda > 0.0) {
        return Err(Error::parameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let known = known_loss(alpha, trimap, known_spec)?;
    let ddc = ddc_loss(alpha, field, mode)?;

    let gradient = known
        .gradient
        .iter()
        .zip(&ddc.gradient)
        .map(|(k, d)| k + lambda * d)
        .collect();

    Ok(LossResult {
        value: known.value + lambda * ddc.value,
        gradient,
        degenerate: known.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::{affinity_weights, build_neighbor_field, Padding};
    use crate::types::ImagePlane;

    fn gray(h: usize, w: usize, values: &[f64]) -> ImagePlane {
        ImagePlane::new(h, w, 1, values.to_vec()).unwrap()
    }

    fn matte(h: usize, w: usize, values: &[f64]) -> AlphaMatte {
        AlphaMatte::new(h, w, values.to_vec()).unwrap()
    }

    fn fub() -> Trimap {
        Trimap::new(
            1,
            3,
            vec![
                TrimapLabel::Foreground,
                TrimapLabel::Unknown,
                TrimapLabel::Background,
            ],
        )
        .unwrap()
    }

    #[test]
    fn known_loss_zero_on_exact_fit() {
        let alpha = matte(1, 3, &[1.0, 0.3, 0.0]);
        let r = known_loss(&alpha, &fub(), &KnownLossSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.gradient.iter().all(|&g| g == 0.0));
        assert!(!r.degenerate);
    }

    #[test]
    fn known_loss_l1_hand_value() {
        // |0.8 - 1| and |0.1 - 0| over two known pixels -> 0.15.
        let alpha = matte(1, 3, &[0.8, 0.3, 0.1]);
        let r = known_loss(&alpha, &fub(), &KnownLossSpec::default()).unwrap();
        assert!((r.value - 0.15).abs() < 1e-12);
        assert!((r.gradient[0] + 0.5).abs() < 1e-12);
        assert_eq!(r.gradient[1], 0.0);
        assert!((r.gradient[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn known_loss_all_unknown_is_degenerate() {
        let trimap = Trimap::constant(2, 2, TrimapLabel::Unknown).unwrap();
        let alpha = AlphaMatte::constant(2, 2, 0.7).unwrap();
        let r = known_loss(&alpha, &trimap, &KnownLossSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn known_loss_mask_mode_supervises_all_pixels() {
        // Binarized targets: [1, 1, 0].
        let alpha = matte(1, 3, &[0.8, 0.3, 0.1]);
        let spec = KnownLossSpec {
            label_mode: LabelMode::MaskAllPixels,
            ..Default::default()
        };
        let r = known_loss(&alpha, &fub(), &spec).unwrap();
        assert!((r.value - (0.2 + 0.7 + 0.1) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn known_loss_bce_hand_value() {
        let alpha = matte(1, 3, &[0.8, 0.3, 0.1]);
        let spec = KnownLossSpec {
            penalty: Penalty::Bce,
            ..Default::default()
        };
        let r = known_loss(&alpha, &fub(), &spec).unwrap();
        let expected = (-(0.8f64.ln()) - (0.9f64.ln())) / 2.0;
        assert!((r.value - expected).abs() < 1e-12);
        // d/da of -ln(a) at 0.8 is -1/0.8, scaled by 1/2.
        assert!((r.gradient[0] + 1.0 / 0.8 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn known_loss_bce_rejects_bad_epsilon() {
        let spec = KnownLossSpec {
            penalty: Penalty::Bce,
            bce_epsilon: 0.5,
            ..Default::default()
        };
        let alpha = matte(1, 3, &[0.8, 0.3, 0.1]);
        assert!(known_loss(&alpha, &fub(), &spec).is_err());
    }

    #[test]
    fn affinity_loss_hand_value() {
        // Residuals [-1/6, 0, 1/6] -> value 1/9.
        let img = gray(1, 3, &[0.0, 0.5, 1.0]);
        let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();
        let weights = affinity_weights(&field);
        let alpha = matte(1, 3, &[1.0, 0.5, 0.0]);
        let r = affinity_loss(&alpha, &field, &weights, NormalizationMode::PerPixel).unwrap();
        assert!((r.value - 1.0 / 9.0).abs() < 1e-12);
        let r2 = affinity_loss(&alpha, &field, &weights, NormalizationMode::Reference).unwrap();
        assert_eq!(r.value, r2.value);
    }

    #[test]
    fn affinity_loss_constant_alpha_exactly_zero() {
        let mut rng = crate::rng::SplitMix64::new(17);
        let data: Vec<f64> = (0..8 * 8 * 3).map(|_| rng.next_unit()).collect();
        let img = ImagePlane::new(8, 8, 3, data).unwrap();
        let field = build_neighbor_field(&img, 5, Padding::Valid).unwrap();
        let weights = affinity_weights(&field);
        for value in [0.0, 0.37, 1.0] {
            let alpha = AlphaMatte::constant(8, 8, value).unwrap();
            let r = affinity_loss(&alpha, &field, &weights, NormalizationMode::Reference).unwrap();
            assert_eq!(r.value, 0.0);
            assert!(r.gradient.iter().all(|&g| g == 0.0));
        }
    }

    fn two_pixel_field() -> (ImagePlane, NeighborField) {
        let img = gray(1, 2, &[0.2, 0.5]);
        let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();
        (img, field)
    }

    #[test]
    fn dc_loss_hand_values() {
        let (_, field) = two_pixel_field();

        // alpha [1, 1]: terms [0, 0.3, 0, 0.3] -> mean 0.15.
        let r = dc_loss(&matte(1, 2, &[1.0, 1.0]), &field, NormalizationMode::Reference).unwrap();
        assert!((r.value - 0.15).abs() < 1e-12);

        // alpha [0.7, 1.0]: the alpha distance replicates the image
        // distance, so the loss vanishes.
        let r = dc_loss(&matte(1, 2, &[0.7, 1.0]), &field, NormalizationMode::Reference).unwrap();
        assert!(r.value < 1e-15);
    }

    #[test]
    fn ddc_loss_hand_values() {
        let (_, field) = two_pixel_field();

        let r = ddc_loss(&matte(1, 2, &[1.0, 1.0]), &field, NormalizationMode::Reference).unwrap();
        assert!((r.value - 0.15).abs() < 1e-12);

        // alpha [0.7, 1.0]: terms [0, 0.6, 0, 0] -> same 0.15 plateau value.
        let r = ddc_loss(&matte(1, 2, &[0.7, 1.0]), &field, NormalizationMode::Reference).unwrap();
        assert!((r.value - 0.15).abs() < 1e-12);
    }

    #[test]
    fn dc_and_ddc_zero_on_constant_scene() {
        let img = ImagePlane::constant(4, 4, 1, 0.5).unwrap();
        let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();
        let alpha = AlphaMatte::constant(4, 4, 0.8).unwrap();
        assert_eq!(dc_loss(&alpha, &field, NormalizationMode::Reference).unwrap().value, 0.0);
        assert_eq!(ddc_loss(&alpha, &field, NormalizationMode::Reference).unwrap().value, 0.0);
    }

    #[test]
    fn ddc_shift_invariance_exact_on_dyadic_grid() {
        // Alpha values and the shift live on the 1/8 grid, so `x + c - (y + c)`
        // is exact and the loss is bitwise unchanged.
        let mut rng = crate::rng::SplitMix64::new(9);
        let data: Vec<f64> = (0..6 * 6).map(|_| rng.next_in_range(0, 8) as f64 / 16.0).collect();
        let img_data: Vec<f64> = (0..6 * 6).map(|_| rng.next_unit()).collect();
        let img = gray(6, 6, &img_data);
        let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();

        let alpha = matte(6, 6, &data);
        let shifted = matte(6, 6, &data.iter().map(|v| v + 0.25).collect::<Vec<_>>());
        let a = ddc_loss(&alpha, &field, NormalizationMode::Reference).unwrap();
        let b = ddc_loss(&shifted, &field, NormalizationMode::Reference).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn mode_scaling_matches_uniform_list_length() {
        // ZeroPad gives every pixel exactly `window` entries, so the two
        // normalizations differ by exactly that factor.
        let mut rng = crate::rng::SplitMix64::new(33);
        let img_data: Vec<f64> = (0..6 * 6).map(|_| rng.next_unit()).collect();
        let alpha_data: Vec<f64> = (0..6 * 6).map(|_| rng.next_unit()).collect();
        let img = gray(6, 6, &img_data);
        let alpha = matte(6, 6, &alpha_data);
        let field = build_neighbor_field(&img, 5, Padding::ZeroPad).unwrap();

        for loss in [dc_loss, ddc_loss] {
            let reference = loss(&alpha, &field, NormalizationMode::Reference).unwrap().value;
            let per_pixel = loss(&alpha, &field, NormalizationMode::PerPixel).unwrap().value;
            assert!((per_pixel / reference - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn total_loss_composes_components() {
        // All-unknown trimap: known part 0 (degenerate), DDC 0.15, lambda 10.
        let (_, field) = two_pixel_field();
        let trimap = Trimap::constant(1, 2, TrimapLabel::Unknown).unwrap();
        let alpha = matte(1, 2, &[0.7, 1.0]);
        let r = total_loss(
            &alpha,
            &trimap,
            &field,
            10.0,
            &KnownLossSpec::default(),
            NormalizationMode::Reference,
        )
        .unwrap();
        assert!((r.value - 1.5).abs() < 1e-12);
        assert!(r.degenerate);
    }

    #[test]
    fn total_loss_zero_at_exact_fit() {
        let img = ImagePlane::constant(1, 2, 1, 0.4).unwrap();
        let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();
        let trimap = Trimap::constant(1, 2, TrimapLabel::Foreground).unwrap();
        let alpha = AlphaMatte::constant(1, 2, 1.0).unwrap();
        let r = total_loss(
            &alpha,
            &trimap,
            &field,
            10.0,
            &KnownLossSpec::default(),
            NormalizationMode::Reference,
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.gradient.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn total_loss_rejects_nonpositive_lambda() {
        let (_, field) = two_pixel_field();
        let trimap = Trimap::constant(1, 2, TrimapLabel::Unknown).unwrap();
        let alpha = matte(1, 2, &[0.7, 1.0]);
        for lambda in [0.0, -1.0] {
            assert!(total_loss(
                &alpha,
                &trimap,
                &field,
                lambda,
                &KnownLossSpec::default(),
                NormalizationMode::Reference,
            )
            .is_err());
        }
    }

    #[test]
    fn dc_zero_characterization_on_dyadic_grid() {
        // Values on the 1/16 grid: distances are exact, and alpha = image
        // replicates every pair distance, so DC is exactly zero. Any pair
        // that misses its distance makes it strictly positive.
        let mut rng = crate::rng::SplitMix64::new(4);
        let data: Vec<f64> = (0..5 * 5).map(|_| rng.next_in_range(0, 16) as f64 / 16.0).collect();
        let img = gray(5, 5, &data);
        let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();

        let replica = matte(5, 5, &data);
        assert_eq!(dc_loss(&replica, &field, NormalizationMode::Reference).unwrap().value, 0.0);

        let mut perturbed = data.clone();
        perturbed[12] = if data[12] <= 0.5 { data[12] + 0.5 } else { data[12] - 0.5 };
        let r = dc_loss(&matte(5, 5, &perturbed), &field, NormalizationMode::Reference).unwrap();
        assert!(r.value > 0.0);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn instance(side: usize) -> impl Strategy<Value = (ImagePlane, AlphaMatte)> {
            (
                proptest::collection::vec(0.0..=1.0f64, side * side),
                proptest::collection::vec(0.0..=1.0f64, side * side),
            )
                .prop_map(move |(img, alpha)| {
                    (
                        ImagePlane::new(side, side, 1, img).unwrap(),
                        AlphaMatte::new(side, side, alpha).unwrap(),
                    )
                })
        }

        proptest! {
            #[test]
            fn all_losses_nonnegative((img, alpha) in instance(5), zero_pad in any::<bool>()) {
                let padding = if zero_pad { Padding::ZeroPad } else { Padding::Valid };
                let field = build_neighbor_field(&img, 3, padding).unwrap();
                let weights = affinity_weights(&field);
                let trimap = Trimap::constant(5, 5, TrimapLabel::Foreground).unwrap();

                prop_assert!(known_loss(&alpha, &trimap, &KnownLossSpec::default()).unwrap().value >= 0.0);
                prop_assert!(affinity_loss(&alpha, &field, &weights, NormalizationMode::Reference).unwrap().value >= 0.0);
                prop_assert!(dc_loss(&alpha, &field, NormalizationMode::Reference).unwrap().value >= 0.0);
                prop_assert!(ddc_loss(&alpha, &field, NormalizationMode::Reference).unwrap().value >= 0.0);
            }

            #[test]
            fn ddc_shift_invariant_within_tolerance((img, alpha) in instance(5), c in 0.0..0.2f64) {
                // General floats only promise near-exactness; the dyadic
                // unit test covers the bitwise claim.
                let field = build_neighbor_field(&img, 3, Padding::Valid).unwrap();
                let shifted_data: Vec<f64> = alpha.data().iter().map(|v| (v * 0.8 + c).min(1.0)).collect();
                let base_data: Vec<f64> = alpha.data().iter().map(|v| v * 0.8).collect();
                let base = AlphaMatte::new(5, 5, base_data).unwrap();
                let shifted = AlphaMatte::new(5, 5, shifted_data).unwrap();
                let a = ddc_loss(&base, &field, NormalizationMode::Reference).unwrap().value;
                let b = ddc_loss(&shifted, &field, NormalizationMode::Reference).unwrap().value;
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
