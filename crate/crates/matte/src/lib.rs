//! Trimap-supervised alpha matting as a per-image variational solve.
//!
//! Given an image and a coarse trimap (foreground / background / unknown),
//! the solver recovers an alpha matte by minimizing a known loss on the
//! labelled pixels plus a directional distance consistency (DDC) prior
//! that propagates opacity to the unknown band: for each pixel and each of
//! its most color-similar in-window neighbors, the alpha difference is
//! pushed to track the color distance.
//!
//! The pieces are usable on their own:
//!
//! * [`types`] — validated grid types: [`ImagePlane`], [`AlphaMatte`],
//!   [`Trimap`], plus byte quantization and region masks;
//! * [`neighbors`] — windowed top-K similar-pixel selection and
//!   row-normalized affinity weights;
//! * [`losses`] — known / affinity / DC / DDC losses with exact
//!   subgradients, and [`gradcheck`] to verify them against central
//!   differences;
//! * [`solver`] — projected subgradient descent over four loss policies;
//! * [`trimap`] — trimap generation from mattes by seeded erosion;
//! * [`metrics`] — SAD, MAD, MSE, Grad, Conn and their
//!   transition-restricted variants;
//! * [`analysis`] — synthetic scenes, the compositing oracle, and
//!   executable forms of the analysis behind the DDC design.
//!
//! The `book/` directory of the repository walks through the concepts; its
//! code samples compile and run as part of `cargo test`.

pub mod analysis;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod neighbors;
pub mod rng;
pub mod solver;
pub mod trimap;
pub mod types;

pub use analysis::{
    braking_residual, composite, make_scene, pair_bound_check, rescale_unit, symmetry_check,
    BrakingReport, HairSequence, PairBoundReport, Scene, SceneKind, SceneSpec,
};
pub use error::{Error, Result};
pub use gradcheck::{check_gradient, GradCheckReport, LossKind};
pub use losses::{
    affinity_loss, dc_loss, ddc_loss, known_loss, total_loss, KnownLossSpec, LabelMode,
    LossResult, NormalizationMode, Penalty,
};
pub use metrics::{conn_metric, evaluate, grad_metric, pixel_metrics, MetricReport, PixelMetrics};
pub use neighbors::{affinity_weights, build_neighbor_field, AffinityWeights, NeighborField, Padding};
pub use solver::{init_alpha, solve, LossPolicy, SolveTrace, SolverConfig, TracePoint};
pub use trimap::{erode_mask, trimap_from_alpha, ErosionSpec, KernelSpec};
pub use types::{
    dequantize_alpha, quantize_alpha, region_masks, AlphaMatte, ImagePlane, RegionMasks, Trimap,
    TrimapLabel,
};

// The guide's code samples double as doctests, so the book cannot drift
// away from the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Compositing, "../../../book/src/compositing.md");
    chapter!(Neighbors, "../../../book/src/neighbors.md");
    chapter!(Losses, "../../../book/src/losses.md");
    chapter!(Solver, "../../../book/src/solver.md");
    chapter!(Trimaps, "../../../book/src/trimaps.md");
    chapter!(Metrics, "../../../book/src/metrics.md");
    chapter!(Theory, "../../../book/src/theory.md");
}
