//! Dense reference solver for small masked Laplace systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::{check_mask_shape, Image, Mask};

/// Unknown-count cap of [`solve_direct`]; dense factorization above this is
/// pointless when the multigrid path exists.
pub const DIRECT_UNKNOWN_LIMIT: usize = 10_000;

/// Solve the masked Laplace problem by assembling the 5-point system over
/// mask pixels and factoring it densely.
///
/// This is the reference implementation the iterative solvers are checked
/// against. It is exact up to factorization rounding but quadratic in
/// memory, hence the unknown cap.
///
/// # Errors
///
/// Dimension mismatch, or more than [`DIRECT_UNKNOWN_LIMIT`] mask pixels.
///
/// # Panics
///
/// A mask covering the entire image leaves no Dirichlet data anywhere, so
/// the system is singular. Any smaller mask yields a positive-definite
/// system: every connected mask component borders at least one non-mask
/// pixel, whose value pins it.
pub fn solve_direct(f: &Image, mask: &Mask) -> Result<Image> {
    check_mask_shape(f.width(), f.height(), mask)?;
    let (w, h) = (f.width(), f.height());

    let mut index = vec![usize::MAX; w * h];
    let mut n = 0usize;
    for (i, &inside) in mask.data().iter().enumerate() {
        if inside {
            index[i] = n;
            n += 1;
        }
    }
    if n == 0 {
        return Ok(f.clone());
    }
    if n > DIRECT_UNKNOWN_LIMIT {
        return Err(Error::SystemTooLarge { unknowns: n, limit: DIRECT_UNKNOWN_LIMIT });
    }
    assert!(
        n < w * h,
        "mask covers the entire image: no Dirichlet data, the system is singular"
    );

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (i, &inside) in mask.data().iter().enumerate() {
        if !inside {
            continue;
        }
        let row = index[i];
        let x = i % w;
        let y = i / w;
        let mut deg = 0.0;
        let couple = |j: usize, a: &mut DMatrix<f64>, b: &mut DVector<f64>| {
            if index[j] != usize::MAX {
                a[(row, index[j])] = -1.0;
            } else {
                b[row] += f.data()[j];
            }
        };
        if x > 0 {
            couple(i - 1, &mut a, &mut b);
            deg += 1.0;
        }
        if x + 1 < w {
            couple(i + 1, &mut a, &mut b);
            deg += 1.0;
        }
        if y > 0 {
            couple(i - w, &mut a, &mut b);
            deg += 1.0;
        }
        if y + 1 < h {
            couple(i + w, &mut a, &mut b);
            deg += 1.0;
        }
        a[(row, row)] = deg;
    }

    let chol = a
        .cholesky()
        .expect("masked Laplacian with boundary data is positive definite");
    let x = chol.solve(&b);

    let mut s = f.clone();
    for (i, &inside) in mask.data().iter().enumerate() {
        if inside {
            s.data_mut()[i] = x[index[i]];
        }
    }
    Ok(s)
}
