//! Bone-covering mask generation: global thresholding plus binary morphology.
//!
//! The automatic pipeline assumes bone regions are brighter than their
//! surroundings, thresholds the image, and then cleans the result up with
//! morphology: speck removal, closing, hole filling and a final dilation so
//! the mask comfortably covers the bright structures.

use crate::image::{Image, Mask};

/// How the threshold separating bone from background is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Maximize between-class variance over a 256-bin histogram.
    Otsu,
    /// Use the given intensity in `[0, 1]` directly.
    Fixed(f64),
}

/// Parameters of [`auto_mask`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    pub threshold: ThresholdMode,
    /// Chebyshev radius of the closing that bridges small gaps.
    pub close_radius: usize,
    /// Chebyshev radius of the final safety dilation.
    pub dilate_radius: usize,
    /// Fill enclosed background pockets after closing.
    pub fill_holes: bool,
    /// Connected bright components smaller than this many pixels are dropped
    /// before the morphology steps.
    pub min_component_area: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        MaskParams {
            threshold: ThresholdMode::Otsu,
            close_radius: 3,
            dilate_radius: 5,
            fill_holes: true,
            min_component_area: 64,
        }
    }
}

/// Global threshold by maximizing between-class variance over a 256-bin
/// histogram of the intensities.
///
/// Ties (plateaus of equal variance, typical for well-separated bimodal
/// data) resolve to the center of the plateau. A constant image returns the
/// constant itself, so `pixel > threshold` yields an empty mask.
pub fn otsu_threshold(img: &Image) -> f64 {
    const BINS: usize = 256;
    let (lo, hi) = img.min_max(None).expect("image is never empty");
    if lo == hi {
        return lo;
    }

    let mut hist = [0u64; BINS];
    for &v in img.data() {
        let bin = ((v * BINS as f64) as usize).min(BINS - 1);
        hist[bin] += 1;
    }

    let total = img.len() as f64;
    let total_sum: f64 = hist.iter().enumerate().map(|(b, &n)| b as f64 * n as f64).sum();

    // Between-class variance for every cut between bin t and t+1; the class
    // sums are built incrementally left to right.
    let mut best = f64::NEG_INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    let mut count0 = 0.0;
    let mut sum0 = 0.0;
    for (t, &bin_count) in hist.iter().enumerate().take(BINS - 1) {
        count0 += bin_count as f64;
        sum0 += t as f64 * bin_count as f64;
        let count1 = total - count0;
        if count0 == 0.0 || count1 == 0.0 {
            continue;
        }
        let mean0 = sum0 / count0;
        let mean1 = (total_sum - sum0) / count1;
        let variance = count0 * count1 * (mean0 - mean1) * (mean0 - mean1);
        if variance > best {
            best = variance;
            tied.clear();
            tied.push(t);
        } else if variance == best {
            tied.push(t);
        }
    }
    if tied.is_empty() {
        // All pixels in one bin (but not all equal): no informative cut.
        return (lo + hi) * 0.5;
    }
    let mean_t = tied.iter().sum::<usize>() as f64 / tied.len() as f64;
    // The cut after bin t separates values below (t+1)/BINS from the rest.
    (mean_t + 1.0) / BINS as f64
}

/// Pixels strictly brighter than the threshold.
pub fn threshold_mask(img: &Image, threshold: f64) -> Mask {
    let data = img.data().iter().map(|&v| v > threshold).collect();
    Mask::from_vec(img.width(), img.height(), data).expect("same shape as source image")
}

/// Dilation by a centered square of side `2 * radius + 1` (Chebyshev ball).
///
/// Pixels outside the image contribute nothing. The square kernel separates
/// into a horizontal and a vertical pass.
pub fn dilate(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let src = mask.data();

    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius).min(w - 1);
            horiz[row + x] = src[row + x0..=row + x1].iter().any(|&b| b);
        }
    }

    let mut out = vec![false; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (y0..=y1).any(|yy| horiz[yy * w + x]);
        }
    }
    Mask::from_vec(w, h, out).expect("same shape as input mask")
}

/// Erosion as the complement of a dilation of the complement.
///
/// Because out-of-image pixels never contribute to a dilation, this keeps a
/// pixel exactly when every in-image pixel of its Chebyshev ball is set —
/// the window is clipped at the border rather than treated as background.
pub fn erode(mask: &Mask, radius: usize) -> Mask {
    let mut inverted = mask.clone();
    for b in inverted.data_mut() {
        *b = !*b;
    }
    let mut dilated = dilate(&inverted, radius);
    for b in dilated.data_mut() {
        *b = !*b;
    }
    dilated
}

/// Morphological closing: dilation followed by erosion at the same radius.
pub fn close(mask: &Mask, radius: usize) -> Mask {
    erode(&dilate(mask, radius), radius)
}

/// Set every unselected region that has no 4-connected path to the image
/// border. Selected pixels are never cleared.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let src = mask.data();
    let mut reaches_border = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();

    let push = |i: usize, reaches: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if !src[i] && !reaches[i] {
            reaches[i] = true;
            stack.push(i);
        }
    };
    for x in 0..w {
        push(x, &mut reaches_border, &mut stack);
        push((h - 1) * w + x, &mut reaches_border, &mut stack);
    }
    for y in 0..h {
        push(y * w, &mut reaches_border, &mut stack);
        push(y * w + w - 1, &mut reaches_border, &mut stack);
    }
    while let Some(i) = stack.pop() {
        let x = i % w;
        let y = i / w;
        if x > 0 {
            push(i - 1, &mut reaches_border, &mut stack);
        }
        if x + 1 < w {
            push(i + 1, &mut reaches_border, &mut stack);
        }
        if y > 0 {
            push(i - w, &mut reaches_border, &mut stack);
        }
        if y + 1 < h {
            push(i + w, &mut reaches_border, &mut stack);
        }
    }

    let data = (0..w * h).map(|i| src[i] || !reaches_border[i]).collect();
    Mask::from_vec(w, h, data).expect("same shape as input mask")
}

/// Drop 8-connected selected components with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &Mask, min_area: usize) -> Mask {
    if min_area <= 1 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let src = mask.data();
    let mut out = vec![false; w * h];
    let mut seen = vec![false; w * h];
    let mut component: Vec<usize> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for start in 0..w * h {
        if !src[start] || seen[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            component.push(i);
            let x = (i % w) as isize;
            let y = (i / w) as isize;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if src[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if component.len() >= min_area {
            for &i in &component {
                out[i] = true;
            }
        }
    }
    Mask::from_vec(w, h, out).expect("same shape as input mask")
}

/// Full automatic mask pipeline: threshold, drop small components, close,
/// fill holes (optional), dilate.
///
/// An all-false result is legal (for example on an all-dark image); the
/// decomposition then degenerates gracefully.
///
/// # Panics
///
/// A fixed threshold outside `[0, 1]` panics; validate user input first.
pub fn auto_mask(img: &Image, params: &MaskParams) -> Mask {
    let threshold = match params.threshold {
        ThresholdMode::Otsu => otsu_threshold(img),
        ThresholdMode::Fixed(t) => {
            assert!((0.0..=1.0).contains(&t), "fixed threshold {t} outside [0, 1]");
            t
        }
    };
    let mut mask = threshold_mask(img, threshold);
    mask = remove_small_components(&mask, params.min_component_area);
    mask = close(&mask, params.close_radius);
    if params.fill_holes {
        mask = fill_holes(&mask);
    }
    dilate(&mask, params.dilate_radius)
}

/// Interpret a grayscale image as a mask: intensity above 0.5 selects the
/// pixel. This is the convention for externally supplied mask files.
pub fn mask_from_image(img: &Image) -> Mask {
    threshold_mask(img, 0.5)
}

/// Render a mask as a black-and-white image (0.0 / 1.0).
pub fn mask_to_image(mask: &Mask) -> Image {
    let data = mask.data().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Image::from_vec(mask.width(), mask.height(), data).expect("same shape as mask")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from_bits(w: usize, h: usize, bits: &[u8]) -> Mask {
        Mask::from_vec(w, h, bits.iter().map(|&b| b != 0).collect()).unwrap()
    }

    /// Independent Otsu: for every candidate cut, recompute both class
    /// weights and means by direct summation over the histogram slices.
    fn otsu_oracle(img: &Image) -> f64 {
        const BINS: usize = 256;
        let (lo, hi) = img.min_max(None).unwrap();
        if lo == hi {
            return lo;
        }
        let mut hist = [0u64; BINS];
        for &v in img.data() {
            hist[((v * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
        let mut best = f64::NEG_INFINITY;
        let mut tied = Vec::new();
        for t in 0..BINS - 1 {
            let count0: f64 = hist[..=t].iter().map(|&n| n as f64).sum();
            let count1: f64 = hist[t + 1..].iter().map(|&n| n as f64).sum();
            if count0 == 0.0 || count1 == 0.0 {
                continue;
            }
            let sum0: f64 = hist[..=t].iter().enumerate().map(|(b, &n)| b as f64 * n as f64).sum();
            let sum1: f64 = hist[t + 1..]
                .iter()
                .enumerate()
                .map(|(b, &n)| (b + t + 1) as f64 * n as f64)
                .sum();
            let v = count0 * count1 * (sum0 / count0 - sum1 / count1).powi(2);
            if v > best {
                best = v;
                tied.clear();
                tied.push(t);
            } else if v == best {
                tied.push(t);
            }
        }
        if tied.is_empty() {
            return (lo + hi) * 0.5;
        }
        (tied.iter().sum::<usize>() as f64 / tied.len() as f64 + 1.0) / BINS as f64
    }

    #[test]
    fn otsu_separates_bimodal_values() {
        let mut data = vec![0.2; 60];
        data.extend(vec![0.8; 40]);
        let img = Image::from_vec(10, 10, data).unwrap();
        let t = otsu_threshold(&img);
        assert!(t > 0.2 && t < 0.8, "threshold {t} outside the gap");
    }

    #[test]
    fn otsu_of_constant_image_is_the_constant() {
        let img = Image::new(6, 6, 0.37).unwrap();
        assert_eq!(otsu_threshold(&img), 0.37);
        // ... so the downstream mask is empty.
        assert!(threshold_mask(&img, otsu_threshold(&img)).none_set());
    }

    #[test]
    fn otsu_matches_bruteforce_oracle() {
        // A handful of deterministic mixtures with different separations.
        for (seed, split) in [(11u64, 0.5), (23, 0.3), (47, 0.7), (91, 0.55)] {
            let mut state = seed;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let data: Vec<f64> = (0..400)
                .map(|_| {
                    let u = next();
                    if u < split {
                        0.15 + 0.2 * next()
                    } else {
                        0.6 + 0.35 * next()
                    }
                })
                .collect();
            let img = Image::from_vec(20, 20, data).unwrap();
            let got = otsu_threshold(&img);
            let want = otsu_oracle(&img);
            assert!(
                (got - want).abs() < 1e-12,
                "seed {seed}: otsu {got} differs from oracle {want}"
            );
        }
    }

    #[test]
    fn threshold_mask_polarity() {
        let img = Image::from_vec(3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let m = threshold_mask(&img, 0.5);
        assert_eq!(m.data(), &[false, false, true]);
    }

    #[test]
    fn dilate_impulse_radius_one_gives_3x3_block() {
        let mut m = Mask::new(5, 5, false).unwrap();
        m.set(2, 2, true);
        let d = dilate(&m, 1);
        for y in 0..5 {
            for x in 0..5 {
                let expect = (1..=3).contains(&x) && (1..=3).contains(&y);
                assert_eq!(d.get(x, y), expect, "at ({x}, {y})");
            }
        }
    }

    #[test]
    fn dilate_radius_zero_is_identity() {
        let m = mask_from_bits(4, 2, &[1, 0, 0, 1, 0, 1, 1, 0]);
        assert_eq!(dilate(&m, 0), m);
    }

    /// Literal definition: a pixel is set iff some set source pixel lies
    /// within Chebyshev distance `radius`.
    fn dilate_oracle(mask: &Mask, radius: usize) -> Mask {
        let (w, h) = (mask.width(), mask.height());
        let mut out = Mask::new(w, h, false).unwrap();
        for y in 0..h {
            for x in 0..w {
                'scan: for yy in 0..h {
                    for xx in 0..w {
                        if mask.get(xx, yy)
                            && xx.abs_diff(x) <= radius
                            && yy.abs_diff(y) <= radius
                        {
                            out.set(x, y, true);
                            break 'scan;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn dilate_matches_chebyshev_oracle() {
        let m = mask_from_bits(
            6,
            5,
            &[
                1, 0, 0, 0, 0, 0, //
                0, 0, 0, 1, 0, 0, //
                0, 0, 0, 0, 0, 0, //
                0, 1, 0, 0, 0, 1, //
                0, 0, 0, 0, 0, 0,
            ],
        );
        for radius in 0..4 {
            assert_eq!(dilate(&m, radius), dilate_oracle(&m, radius), "radius {radius}");
        }
    }

    /// Literal definition with border clipping: keep a pixel iff every
    /// in-image pixel of its Chebyshev ball is set.
    fn erode_oracle(mask: &Mask, radius: usize) -> Mask {
        let (w, h) = (mask.width(), mask.height());
        let mut out = Mask::new(w, h, false).unwrap();
        for y in 0..h {
            for x in 0..w {
                let x0 = x.saturating_sub(radius);
                let x1 = (x + radius).min(w - 1);
                let y0 = y.saturating_sub(radius);
                let y1 = (y + radius).min(h - 1);
                let mut all = true;
                for yy in y0..=y1 {
                    for xx in x0..=x1 {
                        all &= mask.get(xx, yy);
                    }
                }
                out.set(x, y, all);
            }
        }
        out
    }

    #[test]
    fn erode_matches_clipped_window_oracle() {
        let m = mask_from_bits(
            6,
            4,
            &[
                1, 1, 1, 0, 1, 1, //
                1, 1, 1, 1, 1, 1, //
                1, 1, 1, 1, 1, 1, //
                0, 1, 1, 1, 1, 1,
            ],
        );
        for radius in 0..3 {
            assert_eq!(erode(&m, radius), erode_oracle(&m, radius), "radius {radius}");
        }
    }

    #[test]
    fn close_bridges_small_gap() {
        // Two bars separated by a 1-pixel gap merge under radius-1 closing.
        let m = mask_from_bits(7, 3, &[
            0, 1, 1, 0, 1, 1, 0, //
            0, 1, 1, 0, 1, 1, 0, //
            0, 1, 1, 0, 1, 1, 0,
        ]);
        let c = close(&m, 1);
        for y in 0..3 {
            assert!(c.get(3, y), "gap pixel (3, {y}) not closed");
        }
    }

    #[test]
    fn close_radius_zero_is_identity() {
        let m = mask_from_bits(4, 2, &[1, 0, 1, 1, 0, 0, 1, 0]);
        assert_eq!(close(&m, 0), m);
    }

    #[test]
    fn fill_holes_fills_enclosed_ring() {
        let m = mask_from_bits(
            5,
            5,
            &[
                0, 0, 0, 0, 0, //
                0, 1, 1, 1, 0, //
                0, 1, 0, 1, 0, //
                0, 1, 1, 1, 0, //
                0, 0, 0, 0, 0,
            ],
        );
        let f = fill_holes(&m);
        assert!(f.get(2, 2), "enclosed pixel not filled");
        // Background connected to the border is untouched.
        assert!(!f.get(0, 0) && !f.get(4, 4));
        assert_eq!(f.count(), m.count() + 1);
    }

    #[test]
    fn fill_holes_keeps_border_touching_background() {
        // A "C" shape: the pocket is open to the border, so nothing fills.
        let m = mask_from_bits(
            4,
            3,
            &[
                1, 1, 1, 1, //
                1, 0, 0, 0, //
                1, 1, 1, 1,
            ],
        );
        assert_eq!(fill_holes(&m), m);
    }

    /// Union-find over unselected pixels plus one virtual border node; a
    /// different algorithm than the flood fill inside `fill_holes`.
    fn fill_holes_oracle(mask: &Mask) -> Mask {
        let (w, h) = (mask.width(), mask.height());
        let border = w * h; // virtual node
        let mut parent: Vec<usize> = (0..=border).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        };
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if mask.get(x, y) {
                    continue;
                }
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    union(&mut parent, i, border);
                }
                if x + 1 < w && !mask.get(x + 1, y) {
                    union(&mut parent, i, i + 1);
                }
                if y + 1 < h && !mask.get(x, y + 1) {
                    union(&mut parent, i, i + w);
                }
            }
        }
        let border_root = find(&mut parent, border);
        let mut out = mask.clone();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !mask.get(x, y) && find(&mut parent, i) != border_root {
                    out.set(x, y, true);
                }
            }
        }
        out
    }

    #[test]
    fn fill_holes_matches_union_find_oracle() {
        let m = mask_from_bits(
            8,
            6,
            &[
                1, 1, 1, 0, 0, 1, 1, 1, //
                1, 0, 1, 0, 0, 1, 0, 1, //
                1, 1, 1, 0, 0, 1, 0, 1, //
                0, 0, 0, 0, 0, 1, 1, 1, //
                1, 1, 1, 1, 0, 0, 0, 0, //
                1, 0, 0, 1, 0, 0, 0, 0,
            ],
        );
        assert_eq!(fill_holes(&m), fill_holes_oracle(&m));
    }

    #[test]
    fn remove_small_components_drops_specks() {
        let mut m = Mask::new(12, 12, false).unwrap();
        // A 4x4 block (16 px) and an isolated pixel.
        for y in 2..6 {
            for x in 2..6 {
                m.set(x, y, true);
            }
        }
        m.set(10, 10, true);
        let cleaned = remove_small_components(&m, 5);
        assert!(!cleaned.get(10, 10), "speck survived");
        assert_eq!(cleaned.count(), 16);
        // Area exactly at the limit is kept.
        assert_eq!(remove_small_components(&m, 16).count(), 16);
        assert_eq!(remove_small_components(&m, 17).count(), 0);
    }

    #[test]
    fn auto_mask_covers_bright_disk() {
        let (w, h) = (48, 48);
        let mut img = Image::new(w, h, 0.15).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - 24.0, y as f64 - 24.0);
                if (dx * dx + dy * dy).sqrt() < 10.0 {
                    img.set(x, y, 0.85);
                }
            }
        }
        let mask = auto_mask(&img, &MaskParams::default());
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - 24.0, y as f64 - 24.0);
                if (dx * dx + dy * dy).sqrt() < 10.0 {
                    assert!(mask.get(x, y), "disk pixel ({x}, {y}) not covered");
                }
            }
        }
        assert!(mask.count() > 0 && !mask.all_set());
    }

    #[test]
    fn auto_mask_of_dark_image_is_empty() {
        let img = Image::new(16, 16, 0.08).unwrap();
        assert!(auto_mask(&img, &MaskParams::default()).none_set());
    }

    #[test]
    fn external_mask_convention_is_above_one_half() {
        let img = Image::from_vec(4, 1, vec![0.0, 0.5, 0.500001, 1.0]).unwrap();
        let m = mask_from_image(&img);
        assert_eq!(m.data(), &[false, false, true, true]);
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        (2usize..14, 2usize..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| Mask::from_vec(w, h, bits).unwrap())
        })
    }

    proptest! {
        #[test]
        fn dilate_is_extensive_and_monotone_in_radius(m in arb_mask(), r in 0usize..4) {
            let d1 = dilate(&m, r);
            let d2 = dilate(&m, r + 1);
            for i in 0..m.len() {
                prop_assert!(!m.data()[i] || d1.data()[i], "dilate lost a pixel");
                prop_assert!(!d1.data()[i] || d2.data()[i], "larger radius lost a pixel");
            }
        }

        #[test]
        fn close_is_idempotent(m in arb_mask(), r in 0usize..4) {
            let once = close(&m, r);
            let twice = close(&once, r);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn fill_holes_never_unsets(m in arb_mask()) {
            let f = fill_holes(&m);
            for i in 0..m.len() {
                prop_assert!(!m.data()[i] || f.data()[i]);
            }
        }

        #[test]
        fn auto_mask_covers_surviving_threshold_components(
            data in proptest::collection::vec(0.0f64..=1.0, 100),
        ) {
            let img = Image::from_vec(10, 10, data).unwrap();
            let params = MaskParams {
                min_component_area: 3,
                close_radius: 1,
                dilate_radius: 1,
                ..MaskParams::default()
            };
            let t = otsu_threshold(&img);
            let kept = remove_small_components(&threshold_mask(&img, t), params.min_component_area);
            let auto = auto_mask(&img, &params);
            for i in 0..kept.len() {
                prop_assert!(!kept.data()[i] || auto.data()[i]);
            }
        }
    }
}
