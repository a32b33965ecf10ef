//! Command-line front end: solve mattes, generate trimaps, evaluate
//! predictions, run the analysis experiments, and verify gradients.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure (or a
//! failed verification in `analyze bounds`, `analyze symmetry`, `gradcheck`).

mod cfg;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use matte::analysis::{
    braking_residual, make_scene, pair_bound_check, rescale_unit, symmetry_check, HairSequence,
    SceneKind, SceneSpec,
};
use matte::gradcheck::{check_gradient, LossKind};
use matte::losses::{KnownLossSpec, LabelMode, NormalizationMode, Penalty};
use matte::neighbors::{affinity_weights, build_neighbor_field, Padding};
use matte::rng::{random_alpha, random_image, random_trimap};
use matte::solver::{solve, LossPolicy, SolverConfig};
use matte::trimap::{trimap_from_alpha, ErosionSpec, KernelSpec};
use matte::TrimapLabel;

use cfg::ConfigFile;

#[derive(Debug)]
pub enum CliError {
    /// Usage, parameter or I/O problem; exit code 1.
    Io(String),
    /// Non-finite numerics or a failed numerical verification; exit code 2.
    Numerical(String),
}

impl CliError {
    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<matte::Error> for CliError {
    fn from(e: matte::Error) -> Self {
        match e {
            matte::Error::NumericalFailure(m) => CliError::Numerical(m),
            other => CliError::Io(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "matte",
    version,
    about = "Trimap-supervised alpha matting: solve, trimap, eval, analyze, gradcheck"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // built once at startup
enum Command {
    /// Recover an alpha matte from an image and a trimap.
    Solve(SolveArgs),
    /// Generate a trimap from an alpha matte by erosion.
    Trimap(TrimapArgs),
    /// Compare a predicted matte against ground truth; JSON on stdout.
    Eval(EvalArgs),
    /// Run the built-in analysis experiments and scene generators.
    Analyze(AnalyzeArgs),
    /// Verify analytical loss gradients against central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Input image PNG (8-bit gray or RGB).
    #[arg(long, conflicts_with = "dir")]
    image: Option<PathBuf>,
    /// Trimap PNG with byte values {0, 128, 255}.
    #[arg(long, conflicts_with = "dir")]
    trimap: Option<PathBuf>,
    /// Output alpha PNG.
    #[arg(long, conflicts_with = "dir")]
    out: Option<PathBuf>,
    /// Optional JSON file for the solve trace.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Batch mode: directory of image PNGs (lexicographic order).
    #[arg(long, requires = "trimap_dir", requires = "out_dir")]
    dir: Option<PathBuf>,
    /// Batch mode: directory with one equally-named trimap per image.
    #[arg(long)]
    trimap_dir: Option<PathBuf>,
    /// Batch mode: output directory for alpha PNGs.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Neighbor window size K (odd, default 11).
    #[arg(long, visible_alias = "K")]
    window: Option<usize>,
    /// Weight of the prior loss (default 10).
    #[arg(long)]
    lambda: Option<f64>,
    /// Initial step size (default 0.05).
    #[arg(long)]
    step: Option<f64>,
    /// Momentum coefficient in [0, 1) (default 0.9).
    #[arg(long)]
    momentum: Option<f64>,
    /// Iteration budget (default 2000).
    #[arg(long)]
    iters: Option<usize>,
    /// Relative convergence tolerance (default 1e-7).
    #[arg(long)]
    tol: Option<f64>,
    /// Descent-direction sign softening (default 1e-4).
    #[arg(long)]
    smoothing: Option<f64>,
    /// Trace sampling interval (default 10).
    #[arg(long)]
    trace_every: Option<usize>,
    /// Loss policy: known | known+affinity | known+dc | known+ddc.
    #[arg(long)]
    policy: Option<String>,
    /// Window border handling: valid | zero.
    #[arg(long)]
    padding: Option<String>,
    /// Pair-loss normalization: reference | per-pixel.
    #[arg(long)]
    norm: Option<String>,
    /// Known-loss penalty: l1 | bce.
    #[arg(long)]
    penalty: Option<String>,
    /// Known-loss supervision: known | mask.
    #[arg(long)]
    label_mode: Option<String>,
    /// BCE clamp epsilon (default 1e-6).
    #[arg(long)]
    bce_epsilon: Option<f64>,
    /// Reproducibility seed recorded with the run (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Write 16-bit grayscale alpha instead of 8-bit.
    #[arg(long)]
    deep: bool,
    /// key=value config file merged under the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrimapArgs {
    /// Input alpha PNG (8- or 16-bit grayscale).
    #[arg(long)]
    alpha: PathBuf,
    /// Output trimap PNG.
    #[arg(long)]
    out: PathBuf,
    /// Fixed odd erosion kernel size.
    #[arg(long, conflicts_with = "kernel_range")]
    kernel: Option<usize>,
    /// Random kernel range: two values, min and max.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    kernel_range: Option<Vec<usize>>,
    /// Binarization threshold (default 1/255).
    #[arg(long)]
    delta: Option<f64>,
    /// Seed for the random kernel draw (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// key=value config file merged under the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted alpha PNG.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth alpha PNG.
    #[arg(long)]
    gt: PathBuf,
    /// Trimap PNG locating the transition area.
    #[arg(long)]
    trimap: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(subcommand)]
    mode: AnalyzeMode,
}

#[derive(Subcommand)]
enum AnalyzeMode {
    /// Residuals of the thin-structure window-mean recursion.
    Braking {
        /// Sequence family: constant | linear | quadratic | cubic.
        #[arg(long, default_value = "quadratic")]
        form: String,
        /// Window size K (odd).
        #[arg(long, visible_alias = "K", default_value_t = 5)]
        window: usize,
        /// Sequence length.
        #[arg(long, default_value_t = 40)]
        len: usize,
    },
    /// Check the pairwise lower bound on random instances.
    Bounds {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        /// Square instance side length.
        #[arg(long, default_value_t = 8)]
        size: usize,
        /// Comma-separated window sizes.
        #[arg(long, default_value = "3,5,7,11")]
        windows: String,
        /// Use zero-padded windows instead of valid-only.
        #[arg(long)]
        zero_pad: bool,
    },
    /// Weight symmetry of the affinity row on a linear ramp.
    Symmetry {
        #[arg(long, visible_alias = "K", default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 0.05)]
        slope: f64,
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
    },
    /// Write a synthetic scene triplet (image, alpha, trimap) as PNGs.
    Synth {
        /// Scene kind: ramp | hair | texture.
        #[arg(long)]
        kind: String,
        /// Ramp transition width in columns.
        #[arg(long, default_value_t = 6)]
        width: usize,
        /// Hair length in pixels.
        #[arg(long, default_value_t = 20)]
        length: usize,
        /// Texture amplitude.
        #[arg(long, default_value_t = 0.1)]
        amplitude: f64,
        /// Texture period in pixels.
        #[arg(long, default_value_t = 7)]
        period: usize,
        /// Canvas height.
        #[arg(long, default_value_t = 16)]
        height: usize,
        /// Canvas width (default 16; 32 for hair scenes).
        #[arg(long)]
        canvas_width: Option<usize>,
        /// Foreground color: one gray value or three comma-separated.
        #[arg(long)]
        fg: Option<String>,
        /// Background color: one gray value or three comma-separated.
        #[arg(long, default_value = "0.0")]
        bg: String,
        /// Output directory for image.png, alpha.png, trimap.png.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct GradcheckArgs {
    /// Loss to check: known | affinity | dc | ddc | all.
    #[arg(long, default_value = "all")]
    loss: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Square instance side length.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Number of random instances per loss.
    #[arg(long, default_value_t = 5)]
    instances: usize,
    /// Central difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Neighbor window size.
    #[arg(long, visible_alias = "K", default_value_t = 5)]
    window: usize,
}

fn parse_padding(s: &str) -> Result<Padding, CliError> {
    match s {
        "valid" => Ok(Padding::Valid),
        "zero" | "zeropad" | "zero-pad" => Ok(Padding::ZeroPad),
        other => Err(CliError::io(format!(
            "unknown padding '{other}' (expected valid|zero)"
        ))),
    }
}

fn parse_norm(s: &str) -> Result<NormalizationMode, CliError> {
    match s {
        "reference" => Ok(NormalizationMode::Reference),
        "per-pixel" | "perpixel" => Ok(NormalizationMode::PerPixel),
        other => Err(CliError::io(format!(
            "unknown normalization '{other}' (expected reference|per-pixel)"
        ))),
    }
}

fn parse_penalty(s: &str) -> Result<Penalty, CliError> {
    match s {
        "l1" => Ok(Penalty::L1),
        "bce" => Ok(Penalty::Bce),
        other => Err(CliError::io(format!(
            "unknown penalty '{other}' (expected l1|bce)"
        ))),
    }
}

fn parse_label_mode(s: &str) -> Result<LabelMode, CliError> {
    match s {
        "known" => Ok(LabelMode::TrimapKnownOnly),
        "mask" => Ok(LabelMode::MaskAllPixels),
        other => Err(CliError::io(format!(
            "unknown label mode '{other}' (expected known|mask)"
        ))),
    }
}

fn parse_color(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    let parts = parts.map_err(|e| CliError::io(format!("bad color '{s}': {e}")))?;
    if parts.len() != 1 && parts.len() != 3 {
        return Err(CliError::io(format!(
            "color '{s}' must have 1 or 3 components"
        )));
    }
    Ok(parts)
}

const SOLVE_CONFIG_KEYS: &[&str] = &[
    "window",
    "lambda",
    "step",
    "momentum",
    "iters",
    "tol",
    "smoothing",
    "trace-every",
    "policy",
    "padding",
    "norm",
    "penalty",
    "label-mode",
    "bce-epsilon",
    "seed",
    "deep",
];

fn resolve_solver_config(args: &SolveArgs) -> Result<(SolverConfig, LossPolicy, bool), CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    file.check_keys(SOLVE_CONFIG_KEYS)?;

    let defaults = SolverConfig::default();
    let config = SolverConfig {
        window: file.resolve(args.window, "window", defaults.window)?,
        lambda: file.resolve(args.lambda, "lambda", defaults.lambda)?,
        step_size: file.resolve(args.step, "step", defaults.step_size)?,
        momentum: file.resolve(args.momentum, "momentum", defaults.momentum)?,
        max_iters: file.resolve(args.iters, "iters", defaults.max_iters)?,
        convergence_tol: file.resolve(args.tol, "tol", defaults.convergence_tol)?,
        smoothing: file.resolve(args.smoothing, "smoothing", defaults.smoothing)?,
        trace_every: file.resolve(args.trace_every, "trace-every", defaults.trace_every)?,
        padding: parse_padding(&file.resolve(
            args.padding.clone(),
            "padding",
            "valid".to_string(),
        )?)?,
        normalization: parse_norm(&file.resolve(
            args.norm.clone(),
            "norm",
            "reference".to_string(),
        )?)?,
        known: KnownLossSpec {
            penalty: parse_penalty(&file.resolve(
                args.penalty.clone(),
                "penalty",
                "l1".to_string(),
            )?)?,
            label_mode: parse_label_mode(&file.resolve(
                args.label_mode.clone(),
                "label-mode",
                "known".to_string(),
            )?)?,
            bce_epsilon: file.resolve(args.bce_epsilon, "bce-epsilon", 1e-6)?,
        },
        seed: file.resolve(args.seed, "seed", defaults.seed)?,
    };
    let policy: LossPolicy = file
        .resolve(args.policy.clone(), "policy", "known+ddc".to_string())?
        .parse()
        .map_err(CliError::from)?;
    let deep = args.deep || file.resolve(None::<bool>, "deep", false)?;
    Ok((config, policy, deep))
}

fn cmd_solve_one(
    image_path: &Path,
    trimap_path: &Path,
    out_path: &Path,
    trace_path: Option<&Path>,
    config: &SolverConfig,
    policy: LossPolicy,
    deep: bool,
) -> Result<(), CliError> {
    let image = io::load_image(image_path)?;
    let trimap = io::load_trimap(trimap_path)?;
    let (alpha, trace) = solve(&image, &trimap, config, policy)?;
    io::save_alpha(out_path, &alpha, deep)?;
    if let Some(path) = trace_path {
        let json = serde_json::to_vec_pretty(&trace)
            .map_err(|e| CliError::io(format!("trace serialization failed: {e}")))?;
        std::fs::write(path, json)
            .map_err(|e| CliError::io(format!("cannot write trace '{}': {e}", path.display())))?;
    }
    let last = trace.points.last().expect("trace has at least one point");
    println!(
        "{}: {} iterations, converged={}, total loss {:.6e}{}",
        out_path.display(),
        trace.iterations,
        trace.converged,
        last.total_loss,
        if trace.unanchored {
            " (unanchored: no known pixels)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let (config, policy, deep) = resolve_solver_config(args)?;

    if let Some(dir) = &args.dir {
        let trimap_dir = args.trimap_dir.as_ref().expect("required by clap");
        let out_dir = args.out_dir.as_ref().expect("required by clap");
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::io(format!("cannot create '{}': {e}", out_dir.display())))?;

        let mut names: Vec<String> = std::fs::read_dir(dir)
            .map_err(|e| CliError::io(format!("cannot read '{}': {e}", dir.display())))?
            .filter_map(|entry| entry.ok())
            .filter_map(|entry| entry.file_name().into_string().ok())
            .filter(|name| name.ends_with(".png"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(CliError::io(format!("no .png files in '{}'", dir.display())));
        }

        // Per-file work is independent and deterministic, so parallel
        // fan-out cannot change any output.
        let failures: Vec<(String, CliError)> = names
            .par_iter()
            .filter_map(|name| {
                cmd_solve_one(
                    &dir.join(name),
                    &trimap_dir.join(name),
                    &out_dir.join(name),
                    None,
                    &config,
                    policy,
                    deep,
                )
                .err()
                .map(|e| (name.clone(), e))
            })
            .collect();
        if let Some((name, err)) = failures.into_iter().max_by_key(|(_, e)| e.exit_code()) {
            return Err(match err {
                CliError::Io(m) => CliError::Io(format!("{name}: {m}")),
                CliError::Numerical(m) => CliError::Numerical(format!("{name}: {m}")),
            });
        }
        return Ok(());
    }

    let image = args
        .image
        .as_ref()
        .ok_or_else(|| CliError::io("--image is required (or use --dir)"))?;
    let trimap = args
        .trimap
        .as_ref()
        .ok_or_else(|| CliError::io("--trimap is required"))?;
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| CliError::io("--out is required"))?;
    cmd_solve_one(image, trimap, out, args.trace.as_deref(), &config, policy, deep)
}

const TRIMAP_CONFIG_KEYS: &[&str] = &["kernel", "kernel-min", "kernel-max", "delta", "seed"];

fn cmd_trimap(args: &TrimapArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    file.check_keys(TRIMAP_CONFIG_KEYS)?;

    let kernel = if let Some(k) = file.resolve_opt(args.kernel, "kernel")? {
        KernelSpec::Fixed(k)
    } else if let Some(range) = &args.kernel_range {
        KernelSpec::UniformRandom {
            min: range[0],
            max: range[1],
        }
    } else {
        let min = file.resolve_opt(None::<usize>, "kernel-min")?;
        let max = file.resolve_opt(None::<usize>, "kernel-max")?;
        match (min, max) {
            (Some(min), Some(max)) => KernelSpec::UniformRandom { min, max },
            _ => return Err(CliError::io("one of --kernel or --kernel-range is required")),
        }
    };

    let spec = ErosionSpec {
        kernel,
        binarize_delta: file.resolve(args.delta, "delta", 1.0 / 255.0)?,
        seed: file.resolve(args.seed, "seed", 0)?,
    };
    let alpha = io::load_alpha(&args.alpha)?;
    let trimap = trimap_from_alpha(&alpha, &spec)?;
    io::save_trimap(&args.out, &trimap)?;

    let bg = trimap
        .labels()
        .iter()
        .filter(|l| matches!(l, TrimapLabel::Background))
        .count();
    println!(
        "{}: {} foreground, {} background, {} unknown (kernel {})",
        args.out.display(),
        trimap.known_count() - bg,
        bg,
        trimap.unknown_count(),
        spec.draw_kernel(),
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let pred = io::load_alpha(&args.pred)?;
    let gt = io::load_alpha(&args.gt)?;
    let trimap = io::load_trimap(&args.trimap)?;
    let report = matte::metrics::evaluate(&pred, &gt, &trimap)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::io(format!("report serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

fn braking_sequence(form: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let f: fn(f64) -> f64 = match form {
        "constant" => |_| 1.0,
        "linear" => |t| t,
        "quadratic" => |t| 3.0 + 2.0 * t + t * t,
        "cubic" => |t| t * t * t,
        other => {
            return Err(CliError::io(format!(
                "unknown form '{other}' (expected constant|linear|quadratic|cubic)"
            )))
        }
    };
    Ok((1..=len).map(|t| f(t as f64)).collect())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    match &args.mode {
        AnalyzeMode::Braking { form, window, len } => {
            let raw = braking_sequence(form, *len)?;
            let seq = HairSequence::new(rescale_unit(&raw), *window)?;
            let report = braking_residual(&seq);
            println!("# {form} sequence, K = {window}, length {len}");
            println!("{:>6} {:>24}", "t", "residual");
            for (offset, r) in report.residuals.iter().enumerate() {
                println!("{:>6} {:>24.16e}", window + offset + 1, r);
            }
            println!("max |residual|      = {:.16e}", report.max_abs_residual);
            println!("max equivalence gap = {:.16e}", report.max_equivalence_gap);
            Ok(())
        }
        AnalyzeMode::Bounds {
            seed,
            instances,
            size,
            windows,
            zero_pad,
        } => {
            let windows: Vec<usize> = windows
                .split(',')
                .map(|w| w.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::io(format!("bad --windows list: {e}")))?;
            let padding = if *zero_pad { Padding::ZeroPad } else { Padding::Valid };
            let mut total_pairs = 0usize;
            let mut total_violations = 0usize;
            let mut worst = f64::INFINITY;
            for &window in &windows {
                for i in 0..*instances {
                    let inst_seed = seed
                        .wrapping_add(i as u64)
                        .wrapping_mul(2654435761)
                        .wrapping_add(window as u64);
                    let channels = if i % 2 == 0 { 3 } else { 1 };
                    let image = random_image(inst_seed, *size, *size, channels);
                    let alpha = random_alpha(inst_seed ^ 0x5eed, *size, *size);
                    let field = build_neighbor_field(&image, window, padding)?;
                    let report = pair_bound_check(&alpha, &field)?;
                    total_pairs += report.mutual_pairs;
                    total_violations += report.violations;
                    worst = worst.min(report.worst_slack);
                }
            }
            println!("mutual pairs: {total_pairs}");
            println!("violations: {total_violations}");
            println!("worst slack: {worst:.3e}");
            if total_violations > 0 {
                return Err(CliError::numerical(format!(
                    "{total_violations} pairwise bound violations"
                )));
            }
            Ok(())
        }
        AnalyzeMode::Symmetry {
            window,
            slope,
            offset,
        } => {
            let asym = symmetry_check(*window, *slope, *offset)?;
            println!("max asymmetry: {asym:.3e}");
            if asym >= 1e-12 {
                return Err(CliError::numerical(format!(
                    "ramp weight asymmetry {asym:.3e} exceeds 1e-12"
                )));
            }
            Ok(())
        }
        AnalyzeMode::Synth {
            kind,
            width,
            length,
            amplitude,
            period,
            height,
            canvas_width,
            fg,
            bg,
            out_dir,
        } => {
            let scene_kind = match kind.as_str() {
                "ramp" => SceneKind::Ramp { width: *width },
                "hair" => SceneKind::Hair { length: *length },
                "texture" => SceneKind::Texture {
                    amplitude: *amplitude,
                    period: *period,
                },
                other => {
                    return Err(CliError::io(format!(
                        "unknown scene kind '{other}' (expected ramp|hair|texture)"
                    )))
                }
            };
            let default_fg = if kind == "texture" { "0.6" } else { "1.0" };
            let spec = SceneSpec {
                kind: scene_kind,
                height: *height,
                width: canvas_width.unwrap_or(if kind == "hair" { 32 } else { 16 }),
                fg_color: parse_color(fg.as_deref().unwrap_or(default_fg))?,
                bg_color: parse_color(bg)?,
            };
            let scene = make_scene(&spec)?;
            std::fs::create_dir_all(out_dir)
                .map_err(|e| CliError::io(format!("cannot create '{}': {e}", out_dir.display())))?;
            io::save_image(&out_dir.join("image.png"), &scene.image)?;
            io::save_alpha(&out_dir.join("alpha.png"), &scene.alpha, false)?;
            io::save_trimap(&out_dir.join("trimap.png"), &scene.trimap)?;
            println!(
                "{}: wrote image.png, alpha.png, trimap.png ({}x{})",
                out_dir.display(),
                spec.height,
                spec.width
            );
            Ok(())
        }
    }
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let kinds: Vec<LossKind> = if args.loss == "all" {
        LossKind::ALL.to_vec()
    } else {
        vec![args.loss.parse().map_err(CliError::from)?]
    };

    let mut all_pass = true;
    for kind in kinds {
        let mut max_err: f64 = 0.0;
        let mut checked = 0usize;
        let mut skipped = 0usize;
        for i in 0..args.instances {
            let seed = args
                .seed
                .wrapping_add(i as u64)
                .wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let image = random_image(seed, args.size, args.size, 3);
            let alpha = random_alpha(seed ^ 0xa1fa, args.size, args.size);
            let trimap = random_trimap(seed ^ 0x7713, args.size, args.size);
            let field = build_neighbor_field(&image, args.window, Padding::Valid)?;
            let weights = affinity_weights(&field);
            let report = check_gradient(
                kind,
                &alpha,
                &trimap,
                &field,
                &weights,
                &KnownLossSpec::default(),
                NormalizationMode::Reference,
                args.step,
            )?;
            max_err = max_err.max(report.max_rel_error);
            checked += report.checked;
            skipped += report.skipped;
        }
        let pass = max_err < 1e-4;
        all_pass &= pass;
        println!(
            "{:<8} max relative error {:.3e} ({} coordinates, {} kink-adjacent skipped): {}",
            kind.name(),
            max_err,
            checked,
            skipped,
            if pass { "ok" } else { "FAIL" }
        );
    }
    if !all_pass {
        return Err(CliError::numerical(
            "analytical gradient mismatch against central differences",
        ));
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("MATTE_THREADS") {
        let threads: usize = raw.parse().map_err(|_| {
            CliError::io(format!(
                "MATTE_THREADS must be a positive integer, got '{raw}'"
            ))
        })?;
        if threads == 0 {
            return Err(CliError::io("MATTE_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::io(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Trimap(args) => cmd_trimap(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successful exits; anything else is
            // a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
