//! Deterministic synthetic images for tests and benchmarks.
//!
//! Everything here is pure arithmetic in the pixel coordinates, so repeated
//! calls with the same arguments produce bit-identical images on every
//! platform.

use crate::image::{Image, Mask};

/// Bilinear surface interpolating the four corner values.
///
/// Bilinear surfaces have zero second differences along each axis, which
/// makes them exact fixed points of the interior five-point stencil.
pub fn bilinear(width: usize, height: usize, c00: f64, c10: f64, c01: f64, c11: f64) -> Image {
    let mut img = Image::new(width, height, 0.0).expect("phantom dimensions must be positive");
    let wd = (width - 1).max(1) as f64;
    let hd = (height - 1).max(1) as f64;
    for y in 0..height {
        let v = y as f64 / hd;
        for x in 0..width {
            let u = x as f64 / wd;
            let val = c00 * (1.0 - u) * (1.0 - v)
                + c10 * u * (1.0 - v)
                + c01 * (1.0 - u) * v
                + c11 * u * v;
            img.set(x, y, val);
        }
    }
    img
}

/// Add a compactly supported radial bump centered at `(cx, cy)`.
///
/// The profile is `amplitude * (1 - (r/radius)^2)^2` for `r < radius` and
/// exactly zero outside, so the bump blends smoothly into the background.
pub fn add_bump(img: &mut Image, cx: f64, cy: f64, radius: f64, amplitude: f64) {
    assert!(radius > 0.0, "bump radius must be positive");
    let (w, h) = (img.width(), img.height());
    let x0 = (cx - radius).floor().max(0.0) as usize;
    let x1 = ((cx + radius).ceil() as usize).min(w.saturating_sub(1));
    let y0 = (cy - radius).floor().max(0.0) as usize;
    let y1 = ((cy + radius).ceil() as usize).min(h.saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - cx) / radius;
            let dy = (y as f64 - cy) / radius;
            let r2 = dx * dx + dy * dy;
            if r2 < 1.0 {
                let t = 1.0 - r2;
                let v = img.get(x, y) + amplitude * t * t;
                img.set(x, y, v);
            }
        }
    }
}

/// Filled disk mask: pixels within `radius` (Euclidean) of `(cx, cy)`.
pub fn disk_mask(width: usize, height: usize, cx: f64, cy: f64, radius: f64) -> Mask {
    let mut mask = Mask::new(width, height, false).expect("phantom dimensions must be positive");
    let r2 = radius * radius;
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r2 {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Synthetic radiograph: a smooth tissue-like background with a few bright
/// compact structures standing in for bone.
///
/// Intensities stay inside `[0, 1]` at every size. Used by the throughput
/// benchmarks and the end-to-end tests.
pub fn synthetic_xray(width: usize, height: usize) -> Image {
    let mut img = bilinear(width, height, 0.20, 0.32, 0.28, 0.45);
    let (w, h) = (width as f64, height as f64);
    let scale = w.min(h);
    // Positions and sizes are relative so the structure survives resizing.
    add_bump(&mut img, 0.30 * w, 0.40 * h, 0.18 * scale, 0.50);
    add_bump(&mut img, 0.62 * w, 0.55 * h, 0.14 * scale, 0.42);
    add_bump(&mut img, 0.50 * w, 0.72 * h, 0.09 * scale, 0.30);
    add_bump(&mut img, 0.72 * w, 0.25 * h, 0.07 * scale, 0.22);
    img
}
