//! Decompose grayscale X-ray images into a smooth soft-tissue layer and a
//! contrast-enhanced bone layer.
//!
//! A radiograph blends overlapping structures into one intensity image. This
//! crate splits such an image `f` (intensities in `[0, 1]`) into two layers:
//!
//! * a **soft-tissue layer** `S` — the smooth membrane interpolant of `f`
//!   across the bone region, obtained by solving the Laplace equation with
//!   Dirichlet data on the region boundary, and
//! * a **bone layer** `U = alpha * (f - S) / (1 - S)` — the residual detail
//!   renormalized against the remaining dynamic range and scaled by
//!   `alpha = 1 / max (f - S) / (1 - S)` so its brightest pixel is exactly 1.
//!
//! The decomposition inverts exactly: `f = (1/alpha) * U * (1 - S) + S`.
//!
//! # Pipeline
//!
//! 1. [`mask::auto_mask`] selects the bright, compact bone region (or bring
//!    your own [`Mask`]).
//! 2. [`laplace::solve_dirichlet`] fills the region with the membrane
//!    interpolant of the surrounding intensities.
//! 3. [`decompose`](decompose::decompose) performs the model inversion and
//!    gathers statistics.
//!
//! ```
//! use bonesplit::{decompose, mask, DecomposeOptions, MaskParams};
//!
//! let image = bonesplit::phantom::synthetic_xray(128, 96);
//! let bone_mask = mask::auto_mask(&image, &MaskParams::default());
//! let result = decompose(&image, &bone_mask, &DecomposeOptions::default()).unwrap();
//! assert!(result.alpha >= 1.0);
//! # let _ = result.bone;
//! ```

pub mod decompose;
pub mod error;
pub mod image;
pub mod io;
pub mod laplace;
pub mod mask;
pub mod phantom;

pub use decompose::{
    decompose, ContrastStats, DecompositionResult, DecomposeOptions, DEFAULT_GRADIENT_EPSILON,
    SOFT_TISSUE_CEILING,
};
pub use error::{Error, Result};
pub use image::{BitDepth, GradientField, Image, Mask};
pub use io::{read_grayscale, write_grayscale, Report, Timings};
pub use laplace::{solve_dirichlet, SolveStats, SolverMethod, SolverOptions};
pub use mask::{auto_mask, MaskParams, ThresholdMode};
