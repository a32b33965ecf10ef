//! Executable embodiments of the theory behind the losses: the compositing
//! model, synthetic scenes for solver experiments, the braking-effect
//! recursion of sequence alphas, the pairwise lower bound of the DDC loss,
//! and the symmetric-score property on linear ramps.

use crate::error::{check_same_dims, Error, Result};
use crate::neighbors::{affinity_weights, build_neighbor_field, NeighborField, Padding};
use crate::trimap::{trimap_from_alpha, ErosionSpec, KernelSpec};
use crate::types::{AlphaMatte, ImagePlane, Trimap};

/// Compositing model: I = alpha F + (1 - alpha) B, per pixel per channel.
pub fn composite(alpha: &AlphaMatte, fg: &ImagePlane, bg: &ImagePlane) -> Result<ImagePlane> {
    crate::types::check_image_matte_dims(fg, alpha)?;
    check_same_dims((fg.height(), fg.width()), (bg.height(), bg.width()))?;
    if fg.channels() != bg.channels() {
        return Err(Error::data(format!(
            "foreground has {} channels, background {}",
            fg.channels(),
            bg.channels()
        )));
    }
    let ch = fg.channels();
    let mut data = Vec::with_capacity(fg.pixel_count() * ch);
    for i in 0..fg.pixel_count() {
        let a = alpha.data()[i];
        for c in 0..ch {
            data.push(a * fg.pixel(i)[c] + (1.0 - a) * bg.pixel(i)[c]);
        }
    }
    ImagePlane::new(fg.height(), fg.width(), ch, data)
}

/// Synthetic scene geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneKind {
    /// Alpha falls linearly from 1 to 0 across `width` centered columns.
    Ramp { width: usize },
    /// A one-pixel-wide constant-color line of `length` pixels extends
    /// from a solid foreground block into the background.
    Hair { length: usize },
    /// A binary foreground/background split where the foreground carries a
    /// periodic intensity pattern of the given amplitude.
    Texture { amplitude: f64, period: usize },
}

/// A scene recipe: geometry plus canvas size and the two colors.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub height: usize,
    pub width: usize,
    pub fg_color: Vec<f64>,
    pub bg_color: Vec<f64>,
}

/// Width of the solid block a hair scene grows out of.
pub const HAIR_BLOCK_WIDTH: usize = 8;

impl SceneSpec {
    fn validate(&self) -> Result<()> {
        let ch = self.fg_color.len();
        if ch != 1 && ch != 3 {
            return Err(Error::parameter("scene colors must have 1 or 3 channels"));
        }
        if self.bg_color.len() != ch {
            return Err(Error::parameter("foreground/background channel counts differ"));
        }
        for v in self.fg_color.iter().chain(&self.bg_color) {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::parameter(format!("scene color value {v} outside [0, 1]")));
            }
        }
        if self.fg_color == self.bg_color {
            return Err(Error::parameter("scene colors must be distinct"));
        }
        match self.kind {
            SceneKind::Ramp { width } => {
                if width < 2 {
                    return Err(Error::parameter("ramp width must be at least 2"));
                }
                if width + 4 > self.width {
                    return Err(Error::parameter(format!(
                        "ramp width {width} leaves no solid margins on a {}-wide canvas",
                        self.width
                    )));
                }
            }
            SceneKind::Hair { length } => {
                if length == 0 {
                    return Err(Error::parameter("hair length must be positive"));
                }
                if HAIR_BLOCK_WIDTH + length + 2 > self.width {
                    return Err(Error::parameter(format!(
                        "hair of length {length} does not fit a {}-wide canvas",
                        self.width
                    )));
                }
                if self.height < 7 {
                    return Err(Error::parameter("hair scenes need at least 7 rows"));
                }
            }
            SceneKind::Texture { amplitude, period } => {
                if amplitude < 0.0 {
                    return Err(Error::parameter("texture amplitude must be non-negative"));
                }
                if period < 2 {
                    return Err(Error::parameter("texture period must be at least 2"));
                }
                for v in &self.fg_color {
                    if v + amplitude > 1.0 || v - amplitude < 0.0 {
                        return Err(Error::parameter(format!(
                            "texture amplitude {amplitude} pushes foreground value {v} outside [0, 1]"
                        )));
                    }
                }
                if self.width < 8 {
                    return Err(Error::parameter("texture scenes need at least 8 columns"));
                }
            }
        }
        Ok(())
    }
}

/// A generated scene: the observed image, the ground-truth matte, and the
/// coarse trimap a labeller would provide.
#[derive(Debug, Clone)]
pub struct Scene {
    pub image: ImagePlane,
    pub alpha: AlphaMatte,
    pub trimap: Trimap,
    /// Linear indices of the hair line, for hair scenes.
    pub hair: Option<Vec<usize>>,
}

fn constant_plane(spec: &SceneSpec, color: &[f64]) -> ImagePlane {
    let ch = color.len();
    let mut data = Vec::with_capacity(spec.height * spec.width * ch);
    for _ in 0..spec.height * spec.width {
        data.extend_from_slice(color);
    }
    ImagePlane::new(spec.height, spec.width, ch, data).expect("validated color plane")
}

fn scene_trimap(alpha: &AlphaMatte) -> Trimap {
    let spec = ErosionSpec {
        kernel: KernelSpec::Fixed(3),
        ..Default::default()
    };
    trimap_from_alpha(alpha, &spec).expect("fixed odd kernel")
}

/// Builds the scene triplet for a spec.
pub fn make_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    match spec.kind {
        SceneKind::Ramp { width } => {
            let start = (w - width) / 2;
            let mut alpha = Vec::with_capacity(h * w);
            for _ in 0..h {
                for c in 0..w {
                    let v = if c < start {
                        1.0
                    } else if c < start + width {
                        1.0 - (c - start) as f64 / (width - 1) as f64
                    } else {
                        0.0
                    };
                    alpha.push(v);
                }
            }
            let alpha = AlphaMatte::new(h, w, alpha)?;
            let image = composite(&alpha, &constant_plane(spec, &spec.fg_color), &constant_plane(spec, &spec.bg_color))?;
            Ok(Scene {
                trimap: scene_trimap(&alpha),
                image,
                alpha,
                hair: None,
            })
        }
        SceneKind::Hair { length } => {
            let hair_row = h / 2;
            let mut alpha = vec![0.0; h * w];
            for r in 0..h {
                for c in 0..HAIR_BLOCK_WIDTH {
                    alpha[r * w + c] = 1.0;
                }
            }
            let mut hair = Vec::with_capacity(length);
            for c in HAIR_BLOCK_WIDTH..HAIR_BLOCK_WIDTH + length {
                alpha[hair_row * w + c] = 1.0;
                hair.push(hair_row * w + c);
            }
            let alpha = AlphaMatte::new(h, w, alpha)?;
            let image = composite(&alpha, &constant_plane(spec, &spec.fg_color), &constant_plane(spec, &spec.bg_color))?;
            Ok(Scene {
                trimap: scene_trimap(&alpha),
                image,
                alpha,
                hair: Some(hair),
            })
        }
        SceneKind::Texture { amplitude, period } => {
            let ch = spec.fg_color.len();
            let fg_cols = w / 2;
            let mut alpha = vec![0.0; h * w];
            let mut data = Vec::with_capacity(h * w * ch);
            for r in 0..h {
                for c in 0..w {
                    if c < fg_cols {
                        alpha[r * w + c] = 1.0;
                        // The incommensurate row shear keeps texture values
                        // pairwise distinct, so each window's top-K picks
                        // its nearest-value pixels and those selections are
                        // largely mutual.
                        const SHEAR: f64 = 0.618_033_988_749_894_9;
                        let phase = 2.0 * std::f64::consts::PI * (c as f64 + SHEAR * r as f64)
                            / period as f64;
                        let t = amplitude * phase.sin();
                        for v in &spec.fg_color {
                            data.push(v + t);
                        }
                    } else {
                        data.extend_from_slice(&spec.bg_color);
                    }
                }
            }
            let alpha = AlphaMatte::new(h, w, alpha)?;
            let image = ImagePlane::new(h, w, ch, data)?;
            Ok(Scene {
                trimap: scene_trimap(&alpha),
                image,
                alpha,
                hair: None,
            })
        }
    }
}

/// A 1-D sequence of alpha values along a thin structure, with the window
/// size its recursion is evaluated at.
#[derive(Debug, Clone)]
pub struct HairSequence {
    values: Vec<f64>,
    window: usize,
}

impl HairSequence {
    /// `window` must be odd and >= 3; the sequence must be longer than the
    /// window and live in [0, 1].
    pub fn new(values: Vec<f64>, window: usize) -> Result<Self> {
        if window < 3 || window.is_multiple_of(2) {
            return Err(Error::parameter(format!(
                "window must be an odd integer >= 3, got {window}"
            )));
        }
        if values.len() <= window {
            return Err(Error::parameter(format!(
                "sequence length {} must exceed the window {window}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("sequence value {v} outside [0, 1]")));
        }
        Ok(HairSequence { values, window })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Prefix sums S_t = sum of the first t values, with S_0 = 0.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let mut sums = Vec::with_capacity(self.values.len() + 1);
        sums.push(0.0);
        for v in &self.values {
            sums.push(sums.last().unwrap() + v);
        }
        sums
    }
}

/// Affinely rescales a sequence into [0, 1]. Residual zero-ness of the
/// braking recursion is affine-invariant, so this does not weaken any test.
pub fn rescale_unit(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - min) / (max - min)).collect()
}

/// Residuals of the window-mean recursion along a homogeneous thin
/// structure.
#[derive(Debug, Clone)]
pub struct BrakingReport {
    /// One residual per valid index:
    /// a_t - a_{t-K} - K (a_{t-(K-1)/2} - a_{t-(K+1)/2}).
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    /// Largest disagreement between the recursion residual and the
    /// difference of consecutive window-mean relation residuals; the two
    /// forms are algebraically identical.
    pub max_equivalence_gap: f64,
}

/// Evaluates the recursion residuals and cross-checks them against the
/// window-mean relation evaluated through prefix sums.
///
/// The recursion annihilates exactly the sequences C1 + C2 t + C3 t^2, so a
/// constant, linear or quadratic profile yields all-zero residuals: such
/// profiles satisfy the nonlocal consensus without ever reaching 1, which
/// is how thin-structure growth stalls under the affinity loss.
pub fn braking_residual(seq: &HairSequence) -> BrakingReport {
    let v = seq.values();
    let k = seq.window();
    let half_lo = k.div_ceil(2);
    let half_hi = (k - 1) / 2;
    let sums = seq.prefix_sums();

    // Window-mean relation residual at 1-indexed position u:
    // S_{u-1} - S_{u-K} + a_u - K a_{u-(K-1)/2}.
    let relation = |u: usize| -> f64 {
        sums[u - 1] - sums[u - k] + v[u - 1] - k as f64 * v[u - 1 - half_hi]
    };

    let mut residuals = Vec::new();
    let mut max_abs: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    for t in k..v.len() {
        let r = v[t] - v[t - k] - k as f64 * (v[t - half_hi] - v[t - half_lo]);
        let u = t + 1; // 1-indexed
        let gap = (r - (relation(u) - relation(u - 1))).abs();
        max_abs = max_abs.max(r.abs());
        max_gap = max_gap.max(gap);
        residuals.push(r);
    }
    BrakingReport {
        residuals,
        max_abs_residual: max_abs,
        max_equivalence_gap: max_gap,
    }
}

/// Outcome of checking the pairwise DDC lower bound over all mutually
/// selected pairs.
#[derive(Debug, Clone, Copy)]
pub struct PairBoundReport {
    /// Number of unordered pairs (i, j) where each pixel selected the other.
    pub mutual_pairs: usize,
    /// Pairs whose two DDC terms sum below 2 d_ij - 1e-12. The bound is an
    /// unconditional triangle-inequality consequence, so this must be zero.
    pub violations: usize,
    /// Pairs where |alpha_i - alpha_j| > d_ij, i.e. the bound is not tight.
    pub non_tight: usize,
    /// Smallest observed value of (term_ij + term_ji) - 2 d_ij.
    pub worst_slack: f64,
}

/// Checks |a_i - a_j - d| + |a_j - a_i - d| >= 2d on every mutual pair,
/// and reports which pairs miss the equality condition |a_i - a_j| <= d.
pub fn pair_bound_check(alpha: &AlphaMatte, field: &NeighborField) -> Result<PairBoundReport> {
    check_same_dims(
        (field.height(), field.width()),
        (alpha.height(), alpha.width()),
    )?;
    let a = alpha.data();
    let mut report = PairBoundReport {
        mutual_pairs: 0,
        violations: 0,
        non_tight: 0,
        worst_slack: f64::INFINITY,
    };
    for i in 0..field.pixel_count() {
        for e in field.row(i) {
            let j = match e.neighbor() {
                Some(j) if j > i => j,
                _ => continue,
            };
            if !field.contains(j, i) {
                continue;
            }
            let d = e.distance();
            let term_ij = (a[i] - a[j] - d).abs();
            let term_ji = (a[j] - a[i] - d).abs();
            let slack = term_ij + term_ji - 2.0 * d;
            report.mutual_pairs += 1;
            if slack < -1e-12 {
                report.violations += 1;
            }
            if (a[i] - a[j]).abs() > d {
                report.non_tight += 1;
            }
            report.worst_slack = report.worst_slack.min(slack);
        }
    }
    if report.mutual_pairs == 0 {
        report.worst_slack = 0.0;
    }
    Ok(report)
}

/// Maximum asymmetry of the normalized affinity weights at an interior
/// pixel of a 1 x 2K linear ramp I(x) = slope x + offset.
///
/// Equidistant pixels on a ramp share similarity scores, so the weights
/// must be symmetric around the center; the return value is
/// max over dx of |w(+dx) - w(-dx)|.
pub fn symmetry_check(window: usize, slope: f64, offset: f64) -> Result<f64> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::parameter(format!(
            "window must be an odd integer >= 3, got {window}"
        )));
    }
    let width = 2 * window;
    let radius = (window - 1) / 2;
    let probe = window - 1;

    // The probe pixel's window must see the unclamped ramp.
    for x in probe - radius..=probe + radius {
        let v = slope * x as f64 + offset;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::parameter(format!(
                "ramp value {v} at column {x} leaves [0, 1]; shrink the slope or offset"
            )));
        }
    }

    let data: Vec<f64> = (0..width)
        .map(|x| (slope * x as f64 + offset).clamp(0.0, 1.0))
        .collect();
    let image = ImagePlane::new(1, width, 1, data)?;
    let field = build_neighbor_field(&image, window, Padding::Valid)?;
    let weights = affinity_weights(&field);

    let mut by_dx = vec![f64::NAN; 2 * radius + 1];
    for (e, w) in field.row(probe).iter().zip(weights.row(&field, probe)) {
        let j = e.neighbor().expect("valid-mode entries are real pixels");
        let dx = j as isize - probe as isize;
        by_dx[(dx + radius as isize) as usize] = *w;
    }

    let mut max_asym: f64 = 0.0;
    for dx in 1..=radius {
        let plus = by_dx[radius + dx];
        let minus = by_dx[radius - dx];
        assert!(
            plus.is_finite() && minus.is_finite(),
            "probe pixel keeps its full window on a 1-row ramp"
        );
        max_asym = max_asym.max((plus - minus).abs());
    }
    Ok(max_asym)
}
