//! Central-difference verification of the analytical loss gradients.
//!
//! Every loss here is piecewise linear (or smooth, for BCE) in alpha, so a
//! central difference away from the kinks recovers the exact slope up to
//! roundoff. Coordinates whose perturbation bracket could straddle a kink
//! cannot be compared meaningfully and are skipped: a coordinate is skipped
//! when any residual it participates in has magnitude below 10 h.

use crate::error::{Error, Result};
use crate::losses::{
    affinity_loss, dc_loss, ddc_loss, known_loss, KnownLossSpec, NormalizationMode, Penalty,
};
use crate::neighbors::{AffinityWeights, NeighborField};
use crate::types::{AlphaMatte, Trimap};

/// Which loss the checker evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Known,
    Affinity,
    Dc,
    Ddc,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Known,
        LossKind::Affinity,
        LossKind::Dc,
        LossKind::Ddc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Known => "known",
            LossKind::Affinity => "affinity",
            LossKind::Dc => "dc",
            LossKind::Ddc => "ddc",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(LossKind::Known),
            "affinity" => Ok(LossKind::Affinity),
            "dc" => Ok(LossKind::Dc),
            "ddc" => Ok(LossKind::Ddc),
            other => Err(Error::parameter(format!(
                "unknown loss selector '{other}' (expected known|affinity|dc|ddc)"
            ))),
        }
    }
}

/// Outcome of one gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Worst relative error over the compared coordinates.
    pub max_rel_error: f64,
    /// Number of coordinates compared.
    pub checked: usize,
    /// Number of kink-adjacent coordinates skipped.
    pub skipped: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    // Differences this small are difference-quotient roundoff (ulp of the
    // loss divided by 2h), far below the 1/norm quantum a wrong sign term
    // would produce.
    if diff < 1e-9 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Per-coordinate distance to the nearest subgradient kink, measured as the
/// smallest |residual| among the terms the coordinate participates in.
fn kink_distances(
    kind: LossKind,
    alpha: &AlphaMatte,
    trimap: &Trimap,
    field: &NeighborField,
    weights: &AffinityWeights,
    spec: &KnownLossSpec,
) -> Vec<f64> {
    let n = alpha.pixel_count();
    let a = alpha.data();
    let mut dist = vec![f64::INFINITY; n];
    let mut note = |i: usize, r: f64| {
        let r = r.abs();
        if r < dist[i] {
            dist[i] = r;
        }
    };

    match kind {
        LossKind::Known => {
            for (i, &ai) in a.iter().enumerate() {
                match spec.penalty {
                    Penalty::L1 => {
                        if let Some(t) = trimap.target(i) {
                            note(i, ai - t);
                        }
                    }
                    Penalty::Bce => {
                        // BCE is smooth between the clamp boundaries; only
                        // the boundaries themselves are kinks.
                        note(i, ai - spec.bce_epsilon);
                        note(i, ai - (1.0 - spec.bce_epsilon));
                    }
                }
            }
        }
        LossKind::Affinity => {
            for i in 0..n {
                let mut res = 0.0;
                for (e, w) in field.row(i).iter().zip(weights.row(field, i)) {
                    let aj = e.neighbor().map_or(0.0, |j| a[j]);
                    res += w * (aj - a[i]);
                }
                note(i, res);
                for e in field.row(i) {
                    if let Some(j) = e.neighbor() {
                        note(j, res);
                    }
                }
            }
        }
        LossKind::Dc => {
            for i in 0..n {
                for e in field.row(i) {
                    // A self pair is identically zero in alpha, not a kink.
                    if e.neighbor() == Some(i) {
                        continue;
                    }
                    let aj = e.neighbor().map_or(0.0, |j| a[j]);
                    let delta = a[i] - aj;
                    let outer = delta.abs() - e.distance();
                    note(i, outer);
                    note(i, delta);
                    if let Some(j) = e.neighbor() {
                        note(j, outer);
                        note(j, delta);
                    }
                }
            }
        }
        LossKind::Ddc => {
            for i in 0..n {
                for e in field.row(i) {
                    if e.neighbor() == Some(i) {
                        continue;
                    }
                    let aj = e.neighbor().map_or(0.0, |j| a[j]);
                    let r = a[i] - aj - e.distance();
                    note(i, r);
                    if let Some(j) = e.neighbor() {
                        note(j, r);
                    }
                }
            }
        }
    }
    dist
}

/// Compares the analytical gradient of `kind` against central differences
/// with step `h`, skipping kink-adjacent coordinates.
#[allow(clippy::too_many_arguments)] // the full loss context is the argument list
pub fn check_gradient(
    kind: LossKind,
    alpha: &AlphaMatte,
    trimap: &Trimap,
    field: &NeighborField,
    weights: &AffinityWeights,
    spec: &KnownLossSpec,
    mode: NormalizationMode,
    h: f64,
) -> Result<GradCheckReport> {
    // Negated comparison so a NaN step is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(h > 1e-8 && h < 1e-3) {
        return Err(Error::parameter(format!(
            "finite-difference step must lie in (1e-8, 1e-3), got {h}"
        )));
    }

    let analytic = match kind {
        LossKind::Known => known_loss(alpha, trimap, spec)?,
        LossKind::Affinity => affinity_loss(alpha, field, weights, mode)?,
        LossKind::Dc => dc_loss(alpha, field, mode)?,
        LossKind::Ddc => ddc_loss(alpha, field, mode)?,
    };

    let (height, width) = (alpha.height(), alpha.width());
    let eval = |data: Vec<f64>| -> Result<f64> {
        // Probes may step slightly outside [0, 1]; the loss formulas are
        // defined there, so skip the range validation.
        let probe = AlphaMatte::unchecked(height, width, data);
        Ok(match kind {
            LossKind::Known => known_loss(&probe, trimap, spec)?.value,
            LossKind::Affinity => affinity_loss(&probe, field, weights, mode)?.value,
            LossKind::Dc => dc_loss(&probe, field, mode)?.value,
            LossKind::Ddc => ddc_loss(&probe, field, mode)?.value,
        })
    };

    let kinks = kink_distances(kind, alpha, trimap, field, weights, spec);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };

    let mut data = alpha.data().to_vec();
    for i in 0..data.len() {
        if kinks[i] < 10.0 * h {
            report.skipped += 1;
            continue;
        }
        let original = data[i];
        data[i] = original + h;
        let plus = eval(data.clone())?;
        data[i] = original - h;
        let minus = eval(data.clone())?;
        data[i] = original;

        let numeric = (plus - minus) / (2.0 * h);
        let err = rel_error(analytic.gradient[i], numeric);
        if err > report.max_rel_error {
            report.max_rel_error = err;
        }
        report.checked += 1;
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::{affinity_weights, build_neighbor_field, Padding};
    use crate::rng::{random_alpha, random_image, random_trimap};

    fn fixture(seed: u64) -> (AlphaMatte, Trimap, NeighborField, AffinityWeights) {
        let image = random_image(seed, 8, 8, 3);
        let alpha = random_alpha(seed.wrapping_add(1), 8, 8);
        let trimap = random_trimap(seed.wrapping_add(2), 8, 8);
        let field = build_neighbor_field(&image, 5, Padding::Valid).unwrap();
        let weights = affinity_weights(&field);
        (alpha, trimap, field, weights)
    }

    #[test]
    fn checker_validates_step_size() {
        let (alpha, trimap, field, weights) = fixture(1);
        for h in [1e-8, 1e-3, 1e-2] {
            assert!(check_gradient(
                LossKind::Ddc,
                &alpha,
                &trimap,
                &field,
                &weights,
                &KnownLossSpec::default(),
                NormalizationMode::Reference,
                h,
            )
            .is_err());
        }
    }

    #[test]
    fn central_difference_is_exact_on_quadratic() {
        // Self-test of the difference scheme: central differences are
        // exact for quadratics, so the only error is roundoff.
        let n = 16;
        let coeffs: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 * 0.1).collect();
        let anchor: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).fract()).collect();
        let f = |x: &[f64]| -> f64 {
            x.iter()
                .zip(&coeffs)
                .zip(&anchor)
                .map(|((v, c), z)| c * (v - z) * (v - z))
                .sum::<f64>()
                / n as f64
        };
        let point: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).fract()).collect();
        let h = 1e-5;
        let mut max_err: f64 = 0.0;
        let mut probe = point.clone();
        for i in 0..n {
            let truth = 2.0 * coeffs[i] * (point[i] - anchor[i]) / n as f64;
            probe[i] = point[i] + h;
            let plus = f(&probe);
            probe[i] = point[i] - h;
            let minus = f(&probe);
            probe[i] = point[i];
            max_err = max_err.max(rel_error(truth, (plus - minus) / (2.0 * h)));
        }
        assert!(max_err < 1e-8, "max_err = {max_err}");
    }

    #[test]
    fn ddc_gradient_matches_finite_differences() {
        let (alpha, trimap, field, weights) = fixture(7);
        let report = check_gradient(
            LossKind::Ddc,
            &alpha,
            &trimap,
            &field,
            &weights,
            &KnownLossSpec::default(),
            NormalizationMode::Reference,
            1e-5,
        )
        .unwrap();
        assert!(report.checked > 0);
        assert!(report.max_rel_error < 1e-4, "err = {}", report.max_rel_error);
    }

    #[test]
    fn dc_gradient_matches_finite_differences() {
        let (alpha, trimap, field, weights) = fixture(11);
        let report = check_gradient(
            LossKind::Dc,
            &alpha,
            &trimap,
            &field,
            &weights,
            &KnownLossSpec::default(),
            NormalizationMode::PerPixel,
            1e-5,
        )
        .unwrap();
        assert!(report.checked > 0);
        assert!(report.max_rel_error < 1e-4, "err = {}", report.max_rel_error);
    }

    #[test]
    fn affinity_gradient_matches_finite_differences() {
        let (alpha, trimap, field, weights) = fixture(13);
        let report = check_gradient(
            LossKind::Affinity,
            &alpha,
            &trimap,
            &field,
            &weights,
            &KnownLossSpec::default(),
            NormalizationMode::Reference,
            1e-5,
        )
        .unwrap();
        assert!(report.checked > 0);
        assert!(report.max_rel_error < 1e-4, "err = {}", report.max_rel_error);
    }

    #[test]
    fn known_l1_gradient_matches_finite_differences() {
        let (alpha, trimap, field, weights) = fixture(17);
        let report = check_gradient(
            LossKind::Known,
            &alpha,
            &trimap,
            &field,
            &weights,
            &KnownLossSpec::default(),
            NormalizationMode::Reference,
            1e-5,
        )
        .unwrap();
        assert!(report.checked > 0);
        assert!(report.max_rel_error < 1e-6, "err = {}", report.max_rel_error);
    }

    #[test]
    fn known_bce_gradient_matches_finite_differences() {
        // Keep alpha away from the clamp so the smooth-curvature error of
        // the difference quotient stays far below the tolerance.
        let (alpha, trimap, field, weights) = fixture(19);
        let squeezed: Vec<f64> = alpha.data().iter().map(|v| 0.1 + 0.8 * v).collect();
        let alpha = AlphaMatte::new(8, 8, squeezed).unwrap();
        let spec = KnownLossSpec {
            penalty: Penalty::Bce,
            ..Default::default()
        };
        let report = check_gradient(
            LossKind::Known,
            &alpha,
            &trimap,
            &field,
            &weights,
            &spec,
            NormalizationMode::Reference,
            1e-5,
        )
        .unwrap();
        assert!(report.checked > 0);
        assert!(report.max_rel_error < 1e-4, "err = {}", report.max_rel_error);
    }

    #[test]
    fn zero_pad_gradients_also_verified() {
        let image = random_image(23, 8, 8, 1);
        let alpha = random_alpha(29, 8, 8);
        let trimap = random_trimap(31, 8, 8);
        let field = build_neighbor_field(&image, 3, Padding::ZeroPad).unwrap();
        let weights = affinity_weights(&field);
        for kind in LossKind::ALL {
            let report = check_gradient(
                kind,
                &alpha,
                &trimap,
                &field,
                &weights,
                &KnownLossSpec::default(),
                NormalizationMode::Reference,
                1e-5,
            )
            .unwrap();
            assert!(
                report.max_rel_error < 1e-4,
                "{}: err = {}",
                kind.name(),
                report.max_rel_error
            );
        }
    }
}
