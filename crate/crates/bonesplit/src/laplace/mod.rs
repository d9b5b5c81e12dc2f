//! Masked Laplace solver: harmonic interpolation of boundary data.
//!
//! Given an image `f` and a mask `M`, the solver computes the surface `S`
//! that equals `f` outside `M` and satisfies the discrete Laplace equation
//! at every mask pixel — the minimizer of the membrane energy
//! `∬_M ‖∇S‖²` with Dirichlet data `S = f` on the mask boundary.
//!
//! The 5-point stencil at a mask pixel uses the values of its in-image
//! neighbors, whether they are unknowns (mask pixels) or boundary data
//! (non-mask pixels). Pixels on the image border simply drop the missing
//! neighbors — the stencil coefficient shrinks to the neighbor count, which
//! amounts to a natural zero-flux condition along the image edge.
//!
//! Three methods share this formulation:
//! * [`SolverMethod::Multigrid`] (default) — geometric multigrid with
//!   red-black Gauss-Seidel smoothing, linear in the pixel count;
//! * [`SolverMethod::GaussSeidel`] — plain red-black sweeps, for small
//!   problems and cross-checks;
//! * [`SolverMethod::Direct`] — dense factorization, the reference solver
//!   for small systems.

mod direct;
mod multigrid;

pub use direct::{solve_direct, DIRECT_UNKNOWN_LIMIT};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{check_mask_shape, Image, Mask};

/// Algorithm used by [`solve_dirichlet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    #[default]
    Multigrid,
    GaussSeidel,
    Direct,
}

/// Tuning knobs for [`solve_dirichlet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: SolverMethod,
    /// Convergence target for the max-norm residual of the 5-point stencil.
    pub tol: f64,
    /// Iteration cap: V-cycles for multigrid, sweeps for Gauss-Seidel.
    pub max_vcycles: usize,
    /// Red-black sweeps before coarse-grid correction.
    pub pre_sweeps: usize,
    /// Red-black sweeps after coarse-grid correction.
    pub post_sweeps: usize,
    /// Coarsening stops once both grid sides are at most this long.
    pub coarsest_size: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolverMethod::Multigrid,
            tol: 1e-6,
            max_vcycles: 50,
            pre_sweeps: 2,
            post_sweeps: 2,
            coarsest_size: 16,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidOptions(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_vcycles == 0 {
            return Err(Error::InvalidOptions("max_vcycles must be at least 1".into()));
        }
        if self.pre_sweeps + self.post_sweeps == 0 {
            return Err(Error::InvalidOptions("need at least one smoothing sweep per cycle".into()));
        }
        if self.coarsest_size == 0 {
            return Err(Error::InvalidOptions("coarsest_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// What a solve did and how well it converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// V-cycles for multigrid, sweeps for Gauss-Seidel, 1 for direct.
    pub iterations: usize,
    /// Max-norm stencil residual, recomputed after the final iteration.
    pub final_residual: f64,
    pub wall_time_s: f64,
    /// False when the iteration cap was reached before `tol`.
    pub converged: bool,
}

/// Solve the masked Laplace problem: `S = f` outside the mask, discretely
/// harmonic inside it.
///
/// Pixels outside the mask are copied from `f` bit for bit. On
/// non-convergence the best iterate is returned with
/// [`SolveStats::converged`] set to false — callers decide whether that is
/// fatal. An empty mask returns `f` unchanged with zero iterations.
///
/// # Errors
///
/// Dimension mismatch between `f` and `mask`, invalid options, or (for
/// [`SolverMethod::Direct`]) a system above the dense size cap.
pub fn solve_dirichlet(f: &Image, mask: &Mask, opts: &SolverOptions) -> Result<(Image, SolveStats)> {
    check_mask_shape(f.width(), f.height(), mask)?;
    opts.validate()?;
    let start = Instant::now();

    if mask.none_set() {
        let stats = SolveStats {
            iterations: 0,
            final_residual: 0.0,
            wall_time_s: start.elapsed().as_secs_f64(),
            converged: true,
        };
        return Ok((f.clone(), stats));
    }

    let (s, iterations, final_residual) = match opts.method {
        SolverMethod::Multigrid => multigrid::solve(f, mask, opts),
        SolverMethod::GaussSeidel => solve_gauss_seidel(f, mask, opts),
        SolverMethod::Direct => {
            let s = direct::solve_direct(f, mask)?;
            let r = residual(&s, mask);
            (s, 1, r)
        }
    };

    let stats = SolveStats {
        iterations,
        final_residual,
        wall_time_s: start.elapsed().as_secs_f64(),
        converged: final_residual <= opts.tol,
    };
    Ok((s, stats))
}

/// Max-norm defect of the 5-point stencil over mask pixels.
///
/// Zero for an empty mask. Both grids must share a shape (panics otherwise —
/// this is a measurement on an already-validated pair).
pub fn residual(s: &Image, mask: &Mask) -> f64 {
    assert!(
        mask.same_shape_as_image(s),
        "residual: mask {}x{} does not match image {}x{}",
        mask.width(),
        mask.height(),
        s.width(),
        s.height()
    );
    stencil_defect(s.data(), None, mask.data(), s.width(), s.height(), None)
}

/// Run `sweeps` red-black Gauss-Seidel sweeps on `s`, reading Dirichlet
/// data from `f`.
///
/// Pixels outside the mask are reset to `f` on entry and never written by
/// the sweeps; each sweep replaces every mask pixel by the average of its
/// in-image neighbors (red half then black half).
pub fn smooth(s: &Image, f: &Image, mask: &Mask, sweeps: usize) -> Image {
    assert!(s.same_shape(f), "smooth: image shapes differ");
    assert!(mask.same_shape_as_image(f), "smooth: mask shape differs");
    let (w, h) = (f.width(), f.height());
    let mut work = s.clone();
    for (i, v) in work.data_mut().iter_mut().enumerate() {
        if !mask.data()[i] {
            *v = f.data()[i];
        }
    }
    let (red, black) = color_interior(mask.data(), w);
    for _ in 0..sweeps {
        sweep_color(work.data_mut(), None, &red, w, h);
        sweep_color(work.data_mut(), None, &black, w, h);
    }
    work
}

/// Full-weighting restriction to the ceil-halved grid.
///
/// The 3x3 kernel `[1 2 1; 2 4 2; 1 2 1] / 16` is clipped at the image
/// border and renormalized, so constants restrict to constants.
pub fn restrict(fine: &Image) -> Image {
    let (fw, fh) = (fine.width(), fine.height());
    let cw = fw.div_ceil(2);
    let ch = fh.div_ceil(2);
    let mut coarse = vec![0.0; cw * ch];
    restrict_slice(fine.data(), fw, fh, &mut coarse, cw, ch);
    Image::from_vec(cw, ch, coarse).expect("halved dimensions are valid")
}

/// Bilinear prolongation back to a fine grid of the given dimensions.
///
/// The fine dimensions must ceil-halve to the coarse ones. Constants
/// prolong to constants.
pub fn prolong(coarse: &Image, fine_width: usize, fine_height: usize) -> Image {
    let (cw, ch) = (coarse.width(), coarse.height());
    assert!(
        fine_width.div_ceil(2) == cw && fine_height.div_ceil(2) == ch,
        "prolong: {fine_width}x{fine_height} does not coarsen to {cw}x{ch}"
    );
    let mut fine = vec![0.0; fine_width * fine_height];
    for y in 0..fine_height {
        for x in 0..fine_width {
            fine[y * fine_width + x] = prolong_sample(coarse.data(), cw, ch, x, y);
        }
    }
    Image::from_vec(fine_width, fine_height, fine).expect("dimensions validated above")
}

fn solve_gauss_seidel(f: &Image, mask: &Mask, opts: &SolverOptions) -> (Image, usize, f64) {
    let (w, h) = (f.width(), f.height());
    let mut vals = f.data().to_vec();
    let (red, black) = color_interior(mask.data(), w);
    let mut res = stencil_defect(&vals, None, mask.data(), w, h, None);
    let mut sweeps = 0;
    while res > opts.tol && sweeps < opts.max_vcycles {
        sweep_color(&mut vals, None, &red, w, h);
        sweep_color(&mut vals, None, &black, w, h);
        sweeps += 1;
        res = stencil_defect(&vals, None, mask.data(), w, h, None);
    }
    let s = Image::from_vec(w, h, vals).expect("same shape as input");
    (s, sweeps, res)
}

/// Split mask pixels by checkerboard color of `(x + y)`.
pub(crate) fn color_interior(interior: &[bool], width: usize) -> (Vec<u32>, Vec<u32>) {
    let mut red = Vec::new();
    let mut black = Vec::new();
    for (i, &inside) in interior.iter().enumerate() {
        if inside {
            let parity = (i % width + i / width) % 2;
            if parity == 0 {
                red.push(i as u32);
            } else {
                black.push(i as u32);
            }
        }
    }
    (red, black)
}

/// One Gauss-Seidel half-sweep: every listed pixel becomes
/// `(rhs + sum of in-image neighbors) / neighbor count`.
pub(crate) fn sweep_color(vals: &mut [f64], rhs: Option<&[f64]>, idxs: &[u32], width: usize, height: usize) {
    for &iu in idxs {
        let i = iu as usize;
        let x = i % width;
        let y = i / width;
        let mut sum = 0.0;
        let mut deg = 0.0;
        if x > 0 {
            sum += vals[i - 1];
            deg += 1.0;
        }
        if x + 1 < width {
            sum += vals[i + 1];
            deg += 1.0;
        }
        if y > 0 {
            sum += vals[i - width];
            deg += 1.0;
        }
        if y + 1 < height {
            sum += vals[i + width];
            deg += 1.0;
        }
        let b = rhs.map_or(0.0, |r| r[i]);
        vals[i] = (b + sum) / deg;
    }
}

/// Residual `rhs - (deg*v - sum of neighbors)` at every interior pixel.
///
/// Returns the max absolute value; when `out` is given, also writes the
/// per-pixel residual (zero outside the interior).
pub(crate) fn stencil_defect(
    vals: &[f64],
    rhs: Option<&[f64]>,
    interior: &[bool],
    width: usize,
    height: usize,
    mut out: Option<&mut [f64]>,
) -> f64 {
    if let Some(o) = out.as_deref_mut() {
        o.fill(0.0);
    }
    let mut max = 0.0f64;
    for (i, &inside) in interior.iter().enumerate() {
        if !inside {
            continue;
        }
        let x = i % width;
        let y = i / width;
        let mut sum = 0.0;
        let mut deg = 0.0;
        if x > 0 {
            sum += vals[i - 1];
            deg += 1.0;
        }
        if x + 1 < width {
            sum += vals[i + 1];
            deg += 1.0;
        }
        if y > 0 {
            sum += vals[i - width];
            deg += 1.0;
        }
        if y + 1 < height {
            sum += vals[i + width];
            deg += 1.0;
        }
        let b = rhs.map_or(0.0, |r| r[i]);
        let r = b - (deg * vals[i] - sum);
        if let Some(o) = out.as_deref_mut() {
            o[i] = r;
        }
        max = max.max(r.abs());
    }
    max
}

/// Shared full-weighting restriction on raw row-major slices.
pub(crate) fn restrict_slice(fine: &[f64], fw: usize, fh: usize, coarse: &mut [f64], cw: usize, ch: usize) {
    debug_assert_eq!(fine.len(), fw * fh);
    debug_assert_eq!(coarse.len(), cw * ch);
    for j in 0..ch {
        let fy = (2 * j) as i64;
        for i in 0..cw {
            let fx = (2 * i) as i64;
            let mut acc = 0.0;
            let mut weight_sum = 0.0;
            for dy in -1..=1i64 {
                let yy = fy + dy;
                if yy < 0 || yy >= fh as i64 {
                    continue;
                }
                let wy = if dy == 0 { 2.0 } else { 1.0 };
                for dx in -1..=1i64 {
                    let xx = fx + dx;
                    if xx < 0 || xx >= fw as i64 {
                        continue;
                    }
                    let wx = if dx == 0 { 2.0 } else { 1.0 };
                    acc += wx * wy * fine[yy as usize * fw + xx as usize];
                    weight_sum += wx * wy;
                }
            }
            coarse[j * cw + i] = acc / weight_sum;
        }
    }
}

/// Bilinear sample of the coarse grid at fine pixel `(x, y)`.
///
/// Even fine coordinates coincide with coarse pixels; odd ones sit halfway
/// between two (clamped at the last coarse pixel).
pub(crate) fn prolong_sample(coarse: &[f64], cw: usize, ch: usize, x: usize, y: usize) -> f64 {
    let i0 = x / 2;
    let j0 = y / 2;
    let i1 = (i0 + 1).min(cw - 1);
    let j1 = (j0 + 1).min(ch - 1);
    let fx = if x.is_multiple_of(2) { 0.0 } else { 0.5 };
    let fy = if y.is_multiple_of(2) { 0.0 } else { 0.5 };
    let top = coarse[j0 * cw + i0] * (1.0 - fx) + coarse[j0 * cw + i1] * fx;
    let bottom = coarse[j1 * cw + i0] * (1.0 - fx) + coarse[j1 * cw + i1] * fx;
    top * (1.0 - fy) + bottom * fy
}
