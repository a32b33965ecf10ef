//! Per-image variational solve: projected subgradient descent with
//! classical momentum on known loss + lambda * prior loss.
//!
//! The objective is piecewise linear in alpha, so a curvature-free scheme
//! is enough and trivially reproducible: the iteration is sequential, each
//! loss evaluation is deterministic for any worker count, and no randomness
//! enters the dynamics. All pixels are optimized; known pixels are pulled
//! by the known loss rather than pinned, so the prior keeps supervising the
//! whole matte across the known/unknown boundary.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{
    affinity_loss_smoothed, dc_loss_smoothed, ddc_loss_smoothed, known_loss_smoothed,
    KnownLossSpec, NormalizationMode,
};
use crate::neighbors::{affinity_weights, build_neighbor_field, Padding};
use crate::types::{AlphaMatte, ImagePlane, Trimap, TrimapLabel};

/// Which supervision combination drives the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossPolicy {
    Known,
    KnownAffinity,
    KnownDc,
    KnownDdc,
}

impl LossPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            LossPolicy::Known => "known",
            LossPolicy::KnownAffinity => "known+affinity",
            LossPolicy::KnownDc => "known+dc",
            LossPolicy::KnownDdc => "known+ddc",
        }
    }
}

impl std::str::FromStr for LossPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(LossPolicy::Known),
            "known+affinity" | "known-affinity" => Ok(LossPolicy::KnownAffinity),
            "known+dc" | "known-dc" => Ok(LossPolicy::KnownDc),
            "known+ddc" | "known-ddc" => Ok(LossPolicy::KnownDdc),
            other => Err(Error::parameter(format!(
                "unknown loss policy '{other}' (expected known|known+affinity|known+dc|known+ddc)"
            ))),
        }
    }
}

/// All solver tunables.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Neighbor window size K.
    pub window: usize,
    /// Weight of the prior loss against the known loss.
    pub lambda: f64,
    /// Initial step size. Steps decay linearly to zero across the
    /// iteration budget so the endgame rings down onto the attractor
    /// instead of rattling at a fixed-step limit cycle.
    pub step_size: f64,
    /// Classical momentum coefficient in [0, 1).
    pub momentum: f64,
    pub max_iters: usize,
    /// Relative loss-change threshold over a 10-iteration window.
    pub convergence_tol: f64,
    /// Half-width of the softened sign used for the descent direction.
    /// Exact sign subgradients (smoothing 0) deadlock on scenes with many
    /// exactly tied colors: a pixel nudged off a zero-distance consensus
    /// is outvoted back before a coordinated move can happen. Softening
    /// makes near-kink forces proportional so tied regions move together.
    /// Loss values, traces and the losses module are unaffected.
    pub smoothing: f64,
    /// Record a trace point every this many iterations.
    pub trace_every: usize,
    pub padding: Padding,
    pub normalization: NormalizationMode,
    pub known: KnownLossSpec,
    /// Carried for reproducibility bookkeeping; the dynamics themselves are
    /// deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            window: 11,
            lambda: 10.0,
            step_size: 0.05,
            momentum: 0.9,
            max_iters: 2000,
            convergence_tol: 1e-7,
            smoothing: 1e-4,
            trace_every: 10,
            padding: Padding::Valid,
            normalization: NormalizationMode::Reference,
            known: KnownLossSpec::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    // Negated comparisons throughout so NaN parameters are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::parameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::parameter(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::parameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::parameter("iteration budget must be positive"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::parameter(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        if !(0.0..0.5).contains(&self.smoothing) {
            return Err(Error::parameter(format!(
                "smoothing must lie in [0, 0.5), got {}",
                self.smoothing
            )));
        }
        if self.trace_every == 0 {
            return Err(Error::parameter("trace interval must be positive"));
        }
        self.known.validate()
    }
}

/// One recorded iteration of the solve. Losses are the best seen up to
/// that iteration: a fixed-step subgradient method is not a descent method,
/// so the solver keeps the standard running-best bookkeeping, and that is
/// also the iterate it returns.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub total_loss: f64,
    pub known_loss: f64,
    /// Value of the policy's prior term (DDC by default; affinity or DC
    /// under those policies; 0 for the known-only policy).
    pub prior_loss: f64,
    pub max_gradient: f64,
}

/// Record of a solve: sampled loss curve plus outcome flags.
#[derive(Debug, Clone, Serialize)]
pub struct SolveTrace {
    pub points: Vec<TracePoint>,
    /// Iterations actually run (gradient steps taken).
    pub iterations: usize,
    pub converged: bool,
    /// Set when the trimap had no known pixels: the solve ran on the prior
    /// alone and its level is not anchored.
    pub unanchored: bool,
}

/// Initial matte from a trimap: 1 on foreground, 0 on background, 0.5 on
/// unknown.
pub fn init_alpha(trimap: &Trimap) -> AlphaMatte {
    let data = trimap
        .labels()
        .iter()
        .map(|l| match l {
            TrimapLabel::Foreground => 1.0,
            TrimapLabel::Background => 0.0,
            TrimapLabel::Unknown => 0.5,
        })
        .collect();
    AlphaMatte::unchecked(trimap.height(), trimap.width(), data)
}

struct Evaluation {
    total: f64,
    known: f64,
    prior: f64,
    gradient: Vec<f64>,
}

/// Minimizes the policy's total loss over the matte, starting from
/// [`init_alpha`], with the update
/// m <- beta m + g; alpha <- clamp(alpha - eta m, 0, 1).
///
/// Stops when the loss change over a 10-iteration window falls below the
/// relative tolerance, or at the iteration budget. A non-finite loss or
/// gradient aborts with a numerical-failure error.
pub fn solve(
    image: &ImagePlane,
    trimap: &Trimap,
    config: &SolverConfig,
    policy: LossPolicy,
) -> Result<(AlphaMatte, SolveTrace)> {
    config.validate()?;
    crate::error::check_same_dims(
        (image.height(), image.width()),
        (trimap.height(), trimap.width()),
    )?;

    let field = build_neighbor_field(image, config.window, config.padding)?;
    let weights = match policy {
        LossPolicy::KnownAffinity => Some(affinity_weights(&field)),
        _ => None,
    };

    let n = trimap.pixel_count();
    let (height, width) = (trimap.height(), trimap.width());
    let mut alpha = init_alpha(trimap);
    let mut velocity = vec![0.0f64; n];
    let mut history: Vec<f64> = Vec::with_capacity(config.max_iters + 1);

    let eps = config.smoothing;
    let evaluate = |alpha: &AlphaMatte| -> Result<Evaluation> {
        let known = known_loss_smoothed(alpha, trimap, &config.known, eps)?;
        let prior = match policy {
            LossPolicy::Known => None,
            LossPolicy::KnownAffinity => Some(affinity_loss_smoothed(
                alpha,
                &field,
                weights.as_ref().expect("weights built for affinity policy"),
                config.normalization,
                eps,
            )?),
            LossPolicy::KnownDc => Some(dc_loss_smoothed(alpha, &field, config.normalization, eps)?),
            LossPolicy::KnownDdc => Some(ddc_loss_smoothed(alpha, &field, config.normalization, eps)?),
        };
        let (prior_value, gradient) = match prior {
            None => (0.0, known.gradient),
            Some(p) => (
                p.value,
                known
                    .gradient
                    .iter()
                    .zip(&p.gradient)
                    .map(|(k, g)| k + config.lambda * g)
                    .collect(),
            ),
        };
        Ok(Evaluation {
            total: known.value + config.lambda * prior_value,
            known: known.value,
            prior: prior_value,
            gradient,
        })
    };

    let mut trace = SolveTrace {
        points: Vec::new(),
        iterations: 0,
        converged: false,
        unanchored: trimap.known_count() == 0,
    };

    let mut best_alpha = alpha.clone();
    let mut best = TracePoint {
        iteration: 0,
        total_loss: f64::INFINITY,
        known_loss: f64::INFINITY,
        prior_loss: f64::INFINITY,
        max_gradient: f64::INFINITY,
    };

    let mut iter = 0usize;
    loop {
        let eval = evaluate(&alpha)?;
        if !eval.total.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite loss or gradient at iteration {iter}"
            )));
        }
        if eval.total < best.total_loss {
            best = TracePoint {
                iteration: iter,
                total_loss: eval.total,
                known_loss: eval.known,
                prior_loss: eval.prior,
                max_gradient: eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs())),
            };
            best_alpha = alpha.clone();
        }
        history.push(eval.total);

        let record = iter.is_multiple_of(config.trace_every);
        if record {
            trace.points.push(TracePoint { iteration: iter, ..best });
        }

        // Exact fixed point: zero loss means zero subgradient under the
        // sign(0) = 0 convention, so the iterate would never move.
        let fixed_point = best.total_loss == 0.0;
        // Stationarity over the last 10 iterations: the full spread of the
        // window must be small, not just the endpoint difference, so a
        // limit cycle cannot alias into a spurious stop.
        let windowed = iter >= 10 && {
            let window = &history[iter - 10..=iter];
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo <= config.convergence_tol * hi.max(1e-12)
        };
        let stop = fixed_point || windowed || iter == config.max_iters;
        if stop {
            trace.converged = fixed_point || windowed;
            trace.iterations = iter;
            if !record {
                trace.points.push(TracePoint { iteration: iter, ..best });
            }
            break;
        }

        let step = config.step_size * (1.0 - iter as f64 / (config.max_iters + 1) as f64);
        let data = alpha.data();
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            velocity[i] = config.momentum * velocity[i] + eval.gradient[i];
            next.push((data[i] - step * velocity[i]).clamp(0.0, 1.0));
        }
        alpha = AlphaMatte::unchecked(height, width, next);
        iter += 1;
    }

    Ok((best_alpha, trace))
}
