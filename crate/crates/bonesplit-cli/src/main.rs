//! Command-line frontend: single-image and batch decomposition, standalone
//! mask generation, and a throughput benchmark.
//!
//! Exit codes are stable and meant for scripting:
//!
//! | code | meaning                                                        |
//! |------|----------------------------------------------------------------|
//! | 0    | success — including runs that stopped at the iteration cap     |
//! |      | (the report then carries `converged: false`)                   |
//! | 1    | usage error (bad flags, empty benchmark input list, ...)       |
//! | 2    | unreadable input image or mask file                            |
//! | 3    | mask dimensions do not match the image                         |
//! | 4    | an output file could not be written                            |
//! | 5    | the pipeline itself failed (e.g. the image is too small for    |
//! |      | gradient statistics)                                           |
//!
//! Error exits leave no partial output files behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use bonesplit::io::{self, Report, Timings};
use bonesplit::laplace::SolverOptions;
use bonesplit::mask::{auto_mask, MaskParams, ThresholdMode};
use bonesplit::phantom::synthetic_xray;
use bonesplit::{decompose, BitDepth, DecomposeOptions, Image, Mask};

#[derive(Parser)]
#[command(
    name = "bonesplit",
    version,
    about = "Split a grayscale radiograph into a smooth soft-tissue layer and a contrast-boosted bone layer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose one or more images; writes `<stem>_soft` and `<stem>_bone`
    /// next to each input (or into --out-dir)
    Decompose(DecomposeArgs),
    /// Generate the automatic bone mask for an image and save it
    Mask(MaskArgs),
    /// Time the full pipeline and report per-stage medians
    Bench(BenchArgs),
}

/// Flags shared by every command that builds an automatic mask.
#[derive(Args, Clone)]
struct MaskFlags {
    /// Threshold choice: "otsu" or a fixed intensity in [0, 1]
    #[arg(long, default_value = "otsu", value_parser = parse_threshold)]
    threshold: ThresholdMode,
    /// Radius of the closing that bridges small dark gaps
    #[arg(long, default_value_t = MaskParams::default().close_radius)]
    close: usize,
    /// Radius of the final safety dilation
    #[arg(long, default_value_t = MaskParams::default().dilate_radius)]
    dilate: usize,
    /// Drop bright components smaller than this many pixels
    #[arg(long, default_value_t = MaskParams::default().min_component_area)]
    min_area: usize,
    /// Keep enclosed background pockets instead of filling them
    #[arg(long)]
    no_fill_holes: bool,
}

impl MaskFlags {
    fn params(&self) -> MaskParams {
        MaskParams {
            threshold: self.threshold,
            close_radius: self.close,
            dilate_radius: self.dilate,
            fill_holes: !self.no_fill_holes,
            min_component_area: self.min_area,
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    /// Input image(s): PGM (P2/P5) or grayscale PNG
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Mask source: "auto" or a mask image file (pixels > 50% gray are inside)
    #[arg(long, default_value = "auto")]
    mask: String,
    #[command(flatten)]
    mask_flags: MaskFlags,
    /// Solver stopping tolerance on the max-norm residual
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap for the solver
    #[arg(long, default_value_t = 50)]
    max_vcycles: usize,
    /// Output sample depth: 8 or 16
    #[arg(long, default_value = "16", value_parser = parse_depth)]
    depth: BitDepth,
    /// Directory for the output images (default: next to each input)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write a JSON run report here (single input only)
    #[arg(long)]
    report: Option<PathBuf>,
    /// Images processed in parallel (0 = all cores)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct MaskArgs {
    /// Input image: PGM (P2/P5) or grayscale PNG
    input: PathBuf,
    /// Where to save the mask image (black outside, full white inside)
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    mask_flags: MaskFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Images to benchmark
    #[arg(conflicts_with = "synthetic")]
    inputs: Vec<PathBuf>,
    /// Benchmark a generated phantom of this size, e.g. "2044x1514"
    #[arg(long, value_parser = parse_size)]
    synthetic: Option<(usize, usize)>,
    /// Pipeline runs per image; medians are reported
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

fn parse_threshold(s: &str) -> Result<ThresholdMode, String> {
    if s.eq_ignore_ascii_case("otsu") {
        return Ok(ThresholdMode::Otsu);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected \"otsu\" or a number, got {s:?}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("threshold {v} is outside [0, 1]"));
    }
    Ok(ThresholdMode::Fixed(v))
}

fn parse_depth(s: &str) -> Result<BitDepth, String> {
    match s {
        "8" => Ok(BitDepth::Eight),
        "16" => Ok(BitDepth::Sixteen),
        other => Err(format!("expected 8 or 16, got {other:?}")),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("width and height must be positive".into());
    }
    Ok((w, h))
}

/// A failed step with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            std::process::exit(1);
        }
    };
    let code = match cli.command {
        Command::Decompose(args) => cmd_decompose(&args),
        Command::Mask(args) => cmd_mask(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    std::process::exit(code);
}

fn read_image(path: &Path) -> Result<Image, Failure> {
    io::read_grayscale(path)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", path.display())))
}

/// Load a mask image and binarize it: anything brighter than 50% gray is
/// inside.
fn read_mask(path: &Path, image: &Image) -> Result<Mask, Failure> {
    let raw = read_image(path)?;
    if raw.width() != image.width() || raw.height() != image.height() {
        return Err(Failure::new(
            3,
            format!(
                "mask {} is {}x{} but the image is {}x{}",
                path.display(),
                raw.width(),
                raw.height(),
                image.width(),
                image.height()
            ),
        ));
    }
    let data = raw.data().iter().map(|&v| v > 0.5).collect();
    Ok(Mask::from_vec(raw.width(), raw.height(), data).expect("dimensions already checked"))
}

fn output_paths(input: &Path, out_dir: Option<&Path>) -> (PathBuf, PathBuf) {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_owned());
    let ext = input
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "png".to_owned());
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| input.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    (
        dir.join(format!("{stem}_soft.{ext}")),
        dir.join(format!("{stem}_bone.{ext}")),
    )
}

/// Run the pipeline on one input and write its artifacts. Returns the
/// status line for standard output.
fn decompose_one(input: &Path, args: &DecomposeArgs) -> Result<String, Failure> {
    let run_start = Instant::now();
    let f = read_image(input)?;

    let mask_start = Instant::now();
    let mask = if args.mask == "auto" {
        auto_mask(&f, &args.mask_flags.params())
    } else {
        read_mask(Path::new(&args.mask), &f)?
    };
    let mask_s = mask_start.elapsed().as_secs_f64();

    let opts = DecomposeOptions {
        solver: SolverOptions {
            tol: args.tol,
            max_vcycles: args.max_vcycles,
            ..SolverOptions::default()
        },
        ..DecomposeOptions::default()
    };
    let result = decompose(&f, &mask, &opts)
        .map_err(|e| Failure::new(5, format!("{}: {e}", input.display())))?;

    let (soft_path, bone_path) = output_paths(input, args.out_dir.as_deref());
    let written: Result<(), Failure> = (|| {
        io::write_grayscale(&result.soft_tissue, &soft_path, args.depth)
            .map_err(|e| Failure::new(4, format!("cannot write {}: {e}", soft_path.display())))?;
        io::write_grayscale(&result.bone, &bone_path, args.depth)
            .map_err(|e| Failure::new(4, format!("cannot write {}: {e}", bone_path.display())))?;
        Ok(())
    })();
    if let Err(failure) = written {
        // Never leave a half-written pair behind.
        let _ = std::fs::remove_file(&soft_path);
        let _ = std::fs::remove_file(&bone_path);
        return Err(failure);
    }
    let total_s = run_start.elapsed().as_secs_f64();

    if let Some(report_path) = &args.report {
        let report = Report {
            input_path: input.to_string_lossy().into_owned(),
            width: f.width(),
            height: f.height(),
            alpha: result.alpha,
            solver_residual: result.stats.final_residual,
            solver_iterations: result.stats.iterations,
            clamped_pixel_count: result.clamped_pixel_count,
            contrast_gain_median: result.contrast.median_gain,
            converged: result.stats.converged,
            degenerate: result.degenerate,
            timings: Timings {
                mask_s,
                solve_s: result.timings.solve_s,
                decompose_s: result.timings.decompose_s,
                total_s,
            },
        };
        io::write_report(&report, report_path).map_err(|e| {
            Failure::new(4, format!("cannot write {}: {e}", report_path.display()))
        })?;
    }

    Ok(format!(
        "{}: alpha={:.6} total={:.3}s converged={}",
        input.display(),
        result.alpha,
        total_s,
        result.stats.converged
    ))
}

fn cmd_decompose(args: &DecomposeArgs) -> i32 {
    if args.report.is_some() && args.inputs.len() > 1 {
        eprintln!("--report only makes sense with a single input");
        return 1;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("cannot start {} worker(s): {e}", args.jobs);
            return 1;
        }
    };
    let outcomes: Vec<Result<String, Failure>> =
        pool.install(|| args.inputs.par_iter().map(|input| decompose_one(input, args)).collect());

    let mut first_failure = 0;
    let mut failed = 0;
    for outcome in &outcomes {
        match outcome {
            Ok(line) => println!("{line}"),
            Err(failure) => {
                eprintln!("{}", failure.message);
                failed += 1;
                if first_failure == 0 {
                    first_failure = failure.code;
                }
            }
        }
    }
    if failed > 0 && args.inputs.len() > 1 {
        eprintln!("{failed} of {} inputs failed", args.inputs.len());
    }
    first_failure
}

fn cmd_mask(args: &MaskArgs) -> i32 {
    let run = || -> Result<String, Failure> {
        let f = read_image(&args.input)?;
        let mask = auto_mask(&f, &args.mask_flags.params());
        let pixels: Vec<f64> = mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let img = Image::from_vec(mask.width(), mask.height(), pixels)
            .expect("mask dimensions are valid image dimensions");
        if let Err(e) = io::write_grayscale(&img, &args.out, BitDepth::Eight) {
            let _ = std::fs::remove_file(&args.out);
            return Err(Failure::new(4, format!("cannot write {}: {e}", args.out.display())));
        }
        Ok(format!(
            "{}: {} of {} pixels inside",
            args.out.display(),
            mask.count(),
            mask.width() * mask.height()
        ))
    };
    match run() {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(failure) => {
            eprintln!("{}", failure.message);
            failure.code
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn cmd_bench(args: &BenchArgs) -> i32 {
    if args.repeats == 0 {
        eprintln!("--repeats must be at least 1");
        return 1;
    }
    let mut images: Vec<(String, Image)> = Vec::new();
    if let Some((w, h)) = args.synthetic {
        images.push((format!("synthetic:{w}x{h}"), synthetic_xray(w, h)));
    }
    for path in &args.inputs {
        match read_image(path) {
            Ok(img) => images.push((path.to_string_lossy().into_owned(), img)),
            Err(failure) => {
                eprintln!("{}", failure.message);
                return failure.code;
            }
        }
    }
    if images.is_empty() {
        eprintln!("nothing to benchmark: list input images or pass --synthetic WxH");
        return 1;
    }

    let mut runs = Vec::new();
    for (label, f) in &images {
        let mut mask_times = Vec::with_capacity(args.repeats);
        let mut solve_times = Vec::with_capacity(args.repeats);
        let mut decompose_times = Vec::with_capacity(args.repeats);
        let mut totals = Vec::with_capacity(args.repeats);
        let mut alpha = 1.0;
        let mut converged = true;
        for _ in 0..args.repeats {
            let start = Instant::now();
            let mask_start = Instant::now();
            let mask = auto_mask(f, &MaskParams::default());
            mask_times.push(mask_start.elapsed().as_secs_f64());
            let result = match decompose(f, &mask, &DecomposeOptions::default()) {
                Ok(result) => result,
                Err(e) => {
                    eprintln!("{label}: {e}");
                    return 5;
                }
            };
            totals.push(start.elapsed().as_secs_f64());
            solve_times.push(result.timings.solve_s);
            decompose_times.push(result.timings.decompose_s);
            alpha = result.alpha;
            converged = result.stats.converged;
            std::hint::black_box(&result.bone);
        }
        let median_total = median(totals);
        runs.push(serde_json::json!({
            "input": label,
            "width": f.width(),
            "height": f.height(),
            "repeats": args.repeats,
            "median_mask_s": median(mask_times),
            "median_solve_s": median(solve_times),
            "median_decompose_s": median(decompose_times),
            "median_total_s": median_total,
            "mpix_per_s": (f.width() * f.height()) as f64 / 1e6 / median_total,
            "alpha": alpha,
            "converged": converged,
        }));
    }
    let doc = serde_json::json!({ "runs": runs });
    println!("{}", serde_json::to_string_pretty(&doc).expect("benchmark JSON serializes"));
    0
}
