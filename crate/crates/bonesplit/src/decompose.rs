//! Splitting an X-ray into a smooth soft-tissue layer and a contrast-boosted
//! bone layer.
//!
//! The image model is multiplicative attenuation over a smooth background:
//!
//! ```text
//! f = (1/alpha) * U * (1 - S) + S
//! ```
//!
//! where `S` is the soft-tissue layer (the harmonic fill of the masked
//! region, computed by [`crate::laplace::solve_dirichlet`]) and `U` is the
//! bone layer. Inverting the model pixelwise gives
//!
//! ```text
//! U = alpha * (f - S) / (1 - S)
//! ```
//!
//! and `alpha` is fixed by requiring the brightest bone pixel to reach
//! exactly 1:
//!
//! ```text
//! alpha = 1 / max_pixels{ (f - S) / (1 - S) }
//! ```
//!
//! Since `f <= 1`, every ratio is at most 1 and so `alpha >= 1`. Division by
//! `1 - S` is also the contrast amplifier: where the background is bright,
//! gradients of `U` exceed gradients of `f` by roughly `alpha / (1 - S)`.
//!
//! Before the inversion the background is clamped pixelwise to `S <= f`
//! (the bone layer cannot be negative) and `S <= 1 - 1e-6` (the denominator
//! stays positive); both clamps are counted and reported.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{check_image_shape, check_mask_shape, Image, Mask};
use crate::laplace::{solve_dirichlet, SolveStats, SolverOptions};

/// Greatest value the soft-tissue layer may take; keeps `1 - S` bounded
/// away from zero.
pub const SOFT_TISSUE_CEILING: f64 = 1.0 - 1e-6;

/// Default threshold on `|grad f|` below which a pixel is too flat to
/// contribute a meaningful gradient-gain ratio.
pub const DEFAULT_GRADIENT_EPSILON: f64 = 1e-4;

/// Options for [`decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    pub solver: SolverOptions,
    /// Pixels with `|grad f|` at or below this are excluded from the
    /// gradient-gain median.
    pub gradient_epsilon: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            solver: SolverOptions::default(),
            gradient_epsilon: DEFAULT_GRADIENT_EPSILON,
        }
    }
}

/// Gradient statistics comparing the bone layer against the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastStats {
    /// Median of `|grad U| / |grad f|` over mask pixels with
    /// `|grad f| > epsilon`; 0 when no pixel qualifies.
    pub median_gain: f64,
    /// Mean `|grad f|` over all mask pixels (0 for an empty mask).
    pub mean_grad_f: f64,
    /// Mean `|grad U|` over all mask pixels (0 for an empty mask).
    pub mean_grad_u: f64,
    /// The flat-pixel threshold that was applied.
    pub epsilon: f64,
}

/// Wall-clock seconds spent in the two pipeline stages [`decompose`] owns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTimings {
    /// The Laplace solve.
    pub solve_s: f64,
    /// Clamping, normalization constant, bone layer and contrast stats.
    pub decompose_s: f64,
}

/// Everything a decomposition produces.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Smooth background layer; equals the input outside the mask.
    pub soft_tissue: Image,
    /// Contrast-boosted bone layer in `[0, 1]`; its maximum is 1 unless the
    /// decomposition is degenerate.
    pub bone: Image,
    /// Normalization constant, always at least 1.
    pub alpha: f64,
    /// True when the input never rises above the background (`f = S`
    /// everywhere); `alpha` is then 1 by convention and the bone layer is
    /// all zeros.
    pub degenerate: bool,
    /// Pixels whose background value had to be clamped.
    pub clamped_pixel_count: usize,
    pub stats: SolveStats,
    pub contrast: ContrastStats,
    pub timings: StageTimings,
}

/// Clamp the background below the input and below [`SOFT_TISSUE_CEILING`].
///
/// Returns the clamped image and the number of modified pixels. The solver
/// can overshoot `f` slightly inside the mask (its error is only bounded by
/// the residual tolerance), and `1 - S` must stay positive for the model
/// inversion, so both caps are applied pixelwise: `S' = min(S, f, 1 - 1e-6)`.
pub fn clamp_background(s: &Image, f: &Image) -> (Image, usize) {
    assert!(s.same_shape(f), "clamp_background: image shapes differ");
    let mut out = s.clone();
    let mut clamped = 0usize;
    for (v, &fv) in out.data_mut().iter_mut().zip(f.data()) {
        let capped = v.min(fv).min(SOFT_TISSUE_CEILING);
        if capped != *v {
            *v = capped;
            clamped += 1;
        }
    }
    (out, clamped)
}

/// The normalization constant: `1 / max{(f - S) / (1 - S)}` over all pixels.
///
/// Requires a clamped background (`S <= f`, `S <= 1 - 1e-6`). Returns
/// `(alpha, degenerate)`; when the maximum ratio is 0 — the input never
/// rises above the background — `alpha` is 1 by convention and the
/// degenerate flag is set. `alpha >= 1` always, because `f <= 1` bounds
/// every ratio by 1.
pub fn compute_alpha(f: &Image, s: &Image) -> (f64, bool) {
    assert!(s.same_shape(f), "compute_alpha: image shapes differ");
    let mut max_ratio = 0.0f64;
    for (&fv, &sv) in f.data().iter().zip(s.data()) {
        debug_assert!(sv <= fv && sv <= SOFT_TISSUE_CEILING);
        let ratio = (fv - sv) / (1.0 - sv);
        max_ratio = max_ratio.max(ratio);
    }
    if max_ratio == 0.0 {
        (1.0, true)
    } else {
        (1.0 / max_ratio, false)
    }
}

/// The bone layer `U = alpha * (f - S) / (1 - S)`, clamped into `[0, 1]`.
///
/// With `alpha` from [`compute_alpha`] the layer peaks at 1 (the clamp only
/// trims the last-bit overshoot of `alpha * ratio` at the peak); pixels
/// where `f = S` — everything outside the mask included — are exactly 0.
pub fn compute_bone(f: &Image, s: &Image, alpha: f64) -> Image {
    assert!(s.same_shape(f), "compute_bone: image shapes differ");
    assert!(alpha >= 1.0, "alpha must be at least 1, got {alpha}");
    let data = f
        .data()
        .iter()
        .zip(s.data())
        .map(|(&fv, &sv)| (alpha * ((fv - sv) / (1.0 - sv))).clamp(0.0, 1.0))
        .collect();
    Image::from_vec(f.width(), f.height(), data).expect("same shape as input")
}

/// Evaluate the image model: `f = (1/alpha) * U * (1 - S) + S`.
///
/// Feeding a decomposition back through this reproduces the input to within
/// a few floating-point roundings.
pub fn reconstruct(bone: &Image, soft_tissue: &Image, alpha: f64) -> Image {
    assert!(bone.same_shape(soft_tissue), "reconstruct: image shapes differ");
    let inv = 1.0 / alpha;
    let data = bone
        .data()
        .iter()
        .zip(soft_tissue.data())
        .map(|(&u, &s)| inv * u * (1.0 - s) + s)
        .collect();
    Image::from_vec(bone.width(), bone.height(), data).expect("same shape as input")
}

/// Gradient statistics of the bone layer relative to the input, over the
/// mask.
///
/// The median gain skips pixels where `|grad f| <= epsilon`: ratios against
/// a near-zero denominator measure noise, not contrast. If no mask pixel
/// qualifies the median is reported as 0.
///
/// # Errors
///
/// Dimension mismatches, or an image too small for gradients.
pub fn contrast_report(f: &Image, bone: &Image, mask: &Mask, epsilon: f64) -> Result<ContrastStats> {
    check_image_shape(f, bone)?;
    check_mask_shape(f.width(), f.height(), mask)?;
    let gf = f.gradient()?;
    let gu = bone.gradient()?;

    let mut gains: Vec<f64> = Vec::new();
    let mut sum_f = 0.0;
    let mut sum_u = 0.0;
    let mut count = 0usize;
    for (i, &inside) in mask.data().iter().enumerate() {
        if !inside {
            continue;
        }
        let mf = gf.magnitude_at(i);
        let mu = gu.magnitude_at(i);
        sum_f += mf;
        sum_u += mu;
        count += 1;
        if mf > epsilon {
            gains.push(mu / mf);
        }
    }

    let median_gain = median(&mut gains);
    let (mean_grad_f, mean_grad_u) = if count == 0 {
        (0.0, 0.0)
    } else {
        (sum_f / count as f64, sum_u / count as f64)
    };
    Ok(ContrastStats { median_gain, mean_grad_f, mean_grad_u, epsilon })
}

/// Run the full decomposition: solve for the background over the mask,
/// clamp it, fix the normalization constant, and build the bone layer.
///
/// The identity `f = (1/alpha) * bone * (1 - soft) + soft` holds to within
/// rounding on every output, clamped and degenerate cases included. A
/// non-converged solve is not an error — it is reported through
/// `result.stats.converged` so callers can decide.
///
/// # Errors
///
/// Dimension mismatches, intensities outside `[0, 1]`, images smaller than
/// 2x2 (no gradients), or invalid solver options.
pub fn decompose(f: &Image, mask: &Mask, opts: &DecomposeOptions) -> Result<DecompositionResult> {
    check_mask_shape(f.width(), f.height(), mask)?;
    if f.width() < 2 || f.height() < 2 {
        return Err(Error::TooSmallForGradient { width: f.width(), height: f.height() });
    }
    for (i, &v) in f.data().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::IntensityOutOfRange {
                x: i % f.width(),
                y: i / f.width(),
                value: v,
            });
        }
    }

    let solve_start = Instant::now();
    let (raw_soft, stats) = solve_dirichlet(f, mask, &opts.solver)?;
    let solve_s = solve_start.elapsed().as_secs_f64();

    let algebra_start = Instant::now();
    let (soft_tissue, clamped_pixel_count) = clamp_background(&raw_soft, f);
    let (alpha, degenerate) = compute_alpha(f, &soft_tissue);
    let bone = compute_bone(f, &soft_tissue, alpha);
    let contrast = contrast_report(f, &bone, mask, opts.gradient_epsilon)?;
    let decompose_s = algebra_start.elapsed().as_secs_f64();

    Ok(DecompositionResult {
        soft_tissue,
        bone,
        alpha,
        degenerate,
        clamped_pixel_count,
        stats,
        contrast,
        timings: StageTimings { solve_s, decompose_s },
    })
}

/// Median with the even-count convention of averaging the two middle
/// values; 0 for an empty slice.
fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("gains are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * 0.5
    }
}
