//! Geometric multigrid on the masked 5-point Laplacian.
//!
//! Correction scheme: the finest level iterates on the solution itself with
//! Dirichlet data baked into the grid; every coarser level solves the error
//! equation `A e = r` with zero Dirichlet data, since the error vanishes
//! wherever the solution is pinned. Each level keeps the same stencil rule
//! as the finest one — in-image neighbor count on the diagonal — and the
//! mask coarsens conservatively: a coarse node (sitting on the even fine
//! lattice) is interior only when the whole 3x3 fine window under its
//! interpolation hat is interior.
//!
//! The conservative rule matters, and so does the window. Marking a coarse
//! node interior when *any* covered fine pixel is interior pushes the
//! coarse boundary outward across the real Dirichlet pinning — and where a
//! pinned fine row falls off the ceil-halved grid entirely, it replaces
//! that pinning with a free zero-flux image edge; V-cycles on blob-shaped
//! masks then diverge. A 2x2-block "all interior" rule is still not
//! enough: a wall on an odd fine row lands between coarse nodes, the
//! coarsening re-pins it one cell further out, and the displacement
//! doubles with every level. Three levels down, the correction for a
//! pixel one cell from the true wall is computed against a wall four
//! cells away and overshoots several-fold — masks that span an image
//! edge-to-edge (quasi-one-dimensional solves) blow up this way. With the
//! symmetric window the effective wall can only move inward: corrections
//! near boundaries undershoot, and the smoother absorbs the difference.
//! The rule keeps the key invariant that a level is boundary-free exactly
//! when the original mask covers the whole image (every non-interior fine
//! pixel lies under some node's hat).
//!
//! Restriction is clipped full weighting; because the stencils are the
//! unscaled `deg*v - sum(neighbors)` form on every level, the restricted
//! residual picks up the usual factor 4 from the doubled mesh width.
//!
//! The one delicate case is a mask covering the whole image: no pixel is
//! pinned, the operator has the constants as nullspace, and restricted
//! residuals are only consistent up to rounding. Such levels project the
//! right-hand side onto the operator range (subtract the mean) and remove
//! the mean of the computed correction, which keeps the iteration bounded;
//! the finest level needs neither because its right-hand side is zero.

use super::{color_interior, restrict_slice, stencil_defect, sweep_color, SolverOptions};
use crate::image::{Image, Mask};

/// Sweep cap for the coarsest level; grids there are tiny.
const COARSE_SWEEPS: usize = 400;

struct Level {
    width: usize,
    height: usize,
    interior: Vec<bool>,
    red: Vec<u32>,
    black: Vec<u32>,
    full_interior: bool,
    /// Solution on level 0, error correction below.
    vals: Vec<f64>,
    rhs: Vec<f64>,
    /// Scratch buffer for the per-pixel residual.
    res: Vec<f64>,
}

impl Level {
    fn new(width: usize, height: usize, interior: Vec<bool>, vals: Vec<f64>) -> Self {
        let (red, black) = color_interior(&interior, width);
        let full_interior = interior.iter().all(|&b| b);
        let n = width * height;
        Level {
            width,
            height,
            interior,
            red,
            black,
            full_interior,
            vals,
            rhs: vec![0.0; n],
            res: vec![0.0; n],
        }
    }

    fn sweep(&mut self, count: usize) {
        for _ in 0..count {
            sweep_color(&mut self.vals, Some(&self.rhs), &self.red, self.width, self.height);
            sweep_color(&mut self.vals, Some(&self.rhs), &self.black, self.width, self.height);
        }
    }

    fn max_residual(&self) -> f64 {
        stencil_defect(&self.vals, Some(&self.rhs), &self.interior, self.width, self.height, None)
    }

    fn interior_mean(values: &[f64], interior: &[bool]) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (v, &inside) in values.iter().zip(interior) {
            if inside {
                sum += v;
                n += 1;
            }
        }
        sum / n as f64
    }
}

struct Hierarchy {
    levels: Vec<Level>,
    pre_sweeps: usize,
    post_sweeps: usize,
}

impl Hierarchy {
    fn build(f: &Image, mask: &Mask, opts: &SolverOptions) -> Self {
        let mut levels = vec![Level::new(
            f.width(),
            f.height(),
            mask.data().to_vec(),
            f.data().to_vec(),
        )];
        loop {
            let (fw, fh) = {
                let top = levels.last().unwrap();
                (top.width, top.height)
            };
            if fw <= opts.coarsest_size && fh <= opts.coarsest_size {
                break;
            }
            let cw = fw.div_ceil(2);
            let ch = fh.div_ceil(2);
            if cw == fw && ch == fh {
                break;
            }
            let fine_interior = &levels.last().unwrap().interior;
            let mut interior = vec![false; cw * ch];
            for j in 0..ch {
                for i in 0..cw {
                    // Interior only when the whole 3x3 fine window under
                    // this node's interpolation hat is interior. Pixels
                    // beyond the image edge are zero-flux, not boundary,
                    // and do not pin the node.
                    let mut all = true;
                    for dy in -1i64..=1 {
                        let yy = 2 * j as i64 + dy;
                        if yy < 0 || yy >= fh as i64 {
                            continue;
                        }
                        for dx in -1i64..=1 {
                            let xx = 2 * i as i64 + dx;
                            if xx < 0 || xx >= fw as i64 {
                                continue;
                            }
                            all &= fine_interior[yy as usize * fw + xx as usize];
                        }
                    }
                    interior[j * cw + i] = all;
                }
            }
            if !interior.contains(&true) {
                // Nothing left to correct on coarser grids; the previous
                // level's exhaustive sweep solve is the better coarsest.
                break;
            }
            levels.push(Level::new(cw, ch, interior, vec![0.0; cw * ch]));
        }
        Hierarchy { levels, pre_sweeps: opts.pre_sweeps, post_sweeps: opts.post_sweeps }
    }

    fn vcycle(&mut self, k: usize) {
        let last = self.levels.len() - 1;

        if k > 0 && self.levels[k].full_interior {
            // Nullspace of the pure zero-flux operator: keep the right-hand
            // side in its range.
            let level = &mut self.levels[k];
            let mean = Level::interior_mean(&level.rhs, &level.interior);
            for (r, &inside) in level.rhs.iter_mut().zip(&level.interior) {
                if inside {
                    *r -= mean;
                }
            }
        }

        if k == last {
            self.coarse_solve(k);
        } else {
            self.levels[k].sweep(self.pre_sweeps);

            let (fine_part, coarse_part) = self.levels.split_at_mut(k + 1);
            let fine = &mut fine_part[k];
            let coarse = &mut coarse_part[0];
            stencil_defect(
                &fine.vals,
                Some(&fine.rhs),
                &fine.interior,
                fine.width,
                fine.height,
                Some(&mut fine.res),
            );
            restrict_slice(&fine.res, fine.width, fine.height, &mut coarse.rhs, coarse.width, coarse.height);
            // Unscaled stencils on a mesh twice as wide: the restricted
            // residual carries a factor of 4.
            for r in &mut coarse.rhs {
                *r *= 4.0;
            }
            coarse.vals.fill(0.0);

            self.vcycle(k + 1);

            let (fine_part, coarse_part) = self.levels.split_at_mut(k + 1);
            let fine = &mut fine_part[k];
            let coarse = &coarse_part[0];
            for (i, &inside) in fine.interior.iter().enumerate() {
                if inside {
                    let x = i % fine.width;
                    let y = i / fine.width;
                    fine.vals[i] += super::prolong_sample(&coarse.vals, coarse.width, coarse.height, x, y);
                }
            }

            self.levels[k].sweep(self.post_sweeps);
        }

        if k > 0 && self.levels[k].full_interior {
            // Corrections are defined up to a constant here; pin the mean so
            // repeated cycles cannot drift.
            let level = &mut self.levels[k];
            let mean = Level::interior_mean(&level.vals, &level.interior);
            for (v, &inside) in level.vals.iter_mut().zip(&level.interior) {
                if inside {
                    *v -= mean;
                }
            }
        }
    }

    fn coarse_solve(&mut self, k: usize) {
        let rhs_scale = self.levels[k].rhs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let target = 1e-13 * (1.0 + rhs_scale);
        for _ in 0..COARSE_SWEEPS {
            self.levels[k].sweep(1);
            if self.levels[k].max_residual() <= target {
                break;
            }
        }
    }
}

/// V-cycle iteration to the requested tolerance. The mask is assumed
/// non-empty; dimension and option checks happen in the caller.
pub(super) fn solve(f: &Image, mask: &Mask, opts: &SolverOptions) -> (Image, usize, f64) {
    let mut hierarchy = Hierarchy::build(f, mask, opts);
    let mut res = hierarchy.levels[0].max_residual();
    let mut cycles = 0;
    while res > opts.tol && cycles < opts.max_vcycles {
        hierarchy.vcycle(0);
        cycles += 1;
        res = hierarchy.levels[0].max_residual();
    }
    let (w, h) = (hierarchy.levels[0].width, hierarchy.levels[0].height);
    let s = Image::from_vec(w, h, hierarchy.levels.swap_remove(0).vals)
        .expect("level 0 has the input shape");
    (s, cycles, res)
}
