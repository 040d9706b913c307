//! Fixed-length appearance descriptor for a masked image patch.

use super::EmbedError;
use crate::raster::{BinaryMask, ColorImage};

/// Cells per axis of the coarse color grid.
pub const COLOR_GRID: usize = 4;
/// Bins of the hue histogram, each spanning 22.5 degrees.
pub const HUE_BINS: usize = 16;
/// Total descriptor length: a 4x4 RGB mean grid plus the hue histogram.
pub const DESCRIPTOR_DIM: usize = COLOR_GRID * COLOR_GRID * 3 + HUE_BINS;

/// Appearance summary of one masked patch. Values are non-negative and the
/// two blocks (color grid, hue histogram) are each L1-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDescriptor {
    values: Vec<f64>,
}

impl PatchDescriptor {
    /// Wraps precomputed values; used by synthetic datasets and tests.
    pub fn from_values(values: Vec<f64>) -> Self {
        PatchDescriptor { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Hue bin for one RGB pixel. Achromatic pixels (zero chroma) fall into bin
/// zero; otherwise bins cover [0, 360) degrees in 22.5 degree steps. Channel
/// ties resolve in r, g, b order.
fn hue_bin(rgb: [u8; 3]) -> usize {
    let [r, g, b] = rgb.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    if chroma == 0.0 {
        return 0;
    }
    let hue = if max == r {
        60.0 * ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    (hue / 22.5) as usize % HUE_BINS
}

/// Computes the descriptor of the masked patch: per-cell mean colors on a
/// 4x4 grid over the mask's bounding box, then a 16-bin hue histogram over
/// all masked pixels. Each block is L1-normalized independently.
pub fn describe_patch(
    image: &ColorImage,
    mask: &BinaryMask,
) -> Result<PatchDescriptor, EmbedError> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(EmbedError::DimensionMismatch {
            expected: image.width() * image.height(),
            got: mask.width() * mask.height(),
        });
    }
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(EmbedError::EmptyMask)?;
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);

    let mut sums = [[0.0f64; 3]; COLOR_GRID * COLOR_GRID];
    let mut counts = [0usize; COLOR_GRID * COLOR_GRID];
    let mut hue_counts = [0usize; HUE_BINS];
    for y in y0..=y1 {
        for x in x0..=x1 {
            if !mask.get(x, y) {
                continue;
            }
            let cell_x = ((x - x0) * COLOR_GRID / bw).min(COLOR_GRID - 1);
            let cell_y = ((y - y0) * COLOR_GRID / bh).min(COLOR_GRID - 1);
            let cell = cell_y * COLOR_GRID + cell_x;
            let rgb = image.pixel(x, y);
            for (sum, channel) in sums[cell].iter_mut().zip(rgb) {
                *sum += f64::from(channel) / 255.0;
            }
            counts[cell] += 1;
            hue_counts[hue_bin(rgb)] += 1;
        }
    }

    let mut values = Vec::with_capacity(DESCRIPTOR_DIM);
    for (sum, &count) in sums.iter().zip(&counts) {
        for channel in sum {
            values.push(if count > 0 { channel / count as f64 } else { 0.0 });
        }
    }
    let grid_total: f64 = values.iter().sum();
    if grid_total > 0.0 {
        for v in &mut values {
            *v /= grid_total;
        }
    }
    let area: usize = hue_counts.iter().sum();
    for &count in &hue_counts {
        values.push(count as f64 / area as f64);
    }
    debug_assert_eq!(values.len(), DESCRIPTOR_DIM);
    Ok(PatchDescriptor { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn solid_image(width: usize, height: usize, rgb: [u8; 3]) -> ColorImage {
        let mut image = ColorImage::new(width, height);
        for y in 0..height {
            for x in 0..width {
                image.set_pixel(x, y, rgb);
            }
        }
        image
    }

    fn full_mask(width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_raw(width, height, vec![true; width * height])
    }

    #[test]
    fn hue_bins_hit_primary_colors() {
        assert_eq!(hue_bin([255, 0, 0]), 0, "red sits at 0 degrees");
        assert_eq!(hue_bin([0, 255, 0]), 5, "green sits at 120 degrees");
        assert_eq!(hue_bin([0, 0, 255]), 10, "blue sits at 240 degrees");
        assert_eq!(hue_bin([128, 128, 128]), 0, "gray is achromatic");
    }

    #[test]
    fn descriptor_has_fixed_length_and_unit_blocks() {
        let image = solid_image(8, 8, [200, 40, 40]);
        let desc = describe_patch(&image, &full_mask(8, 8)).unwrap();
        assert_eq!(desc.dim(), DESCRIPTOR_DIM);
        let grid_sum: f64 = desc.values()[..48].iter().sum();
        let hue_sum: f64 = desc.values()[48..].iter().sum();
        assert!((grid_sum - 1.0).abs() < 1e-12, "grid block sums to {grid_sum}");
        assert!((hue_sum - 1.0).abs() < 1e-12, "hue block sums to {hue_sum}");
    }

    #[test]
    fn descriptor_is_translation_invariant() {
        let mut image = solid_image(20, 20, [10, 10, 10]);
        let mut shifted = solid_image(20, 20, [10, 10, 10]);
        let mut mask_a = BinaryMask::new(20, 20);
        let mut mask_b = BinaryMask::new(20, 20);
        for dy in 0..5 {
            for dx in 0..7 {
                let rgb = [(dx * 30) as u8, (dy * 40) as u8, 200];
                image.set_pixel(2 + dx, 3 + dy, rgb);
                mask_a.set(2 + dx, 3 + dy, true);
                shifted.set_pixel(11 + dx, 13 + dy, rgb);
                mask_b.set(11 + dx, 13 + dy, true);
            }
        }
        let a = describe_patch(&image, &mask_a).unwrap();
        let b = describe_patch(&shifted, &mask_b).unwrap();
        assert_eq!(a, b, "descriptor must depend only on bbox-relative content");
    }

    #[test]
    fn different_hues_separate() {
        let red = describe_patch(&solid_image(6, 6, [220, 30, 30]), &full_mask(6, 6)).unwrap();
        let blue = describe_patch(&solid_image(6, 6, [30, 30, 220]), &full_mask(6, 6)).unwrap();
        let gap: f64 = red
            .values()
            .iter()
            .zip(blue.values())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(gap > 0.5, "red and blue descriptors differ by {gap}");
    }

    #[test]
    fn empty_mask_and_dim_mismatch_are_rejected() {
        let image = solid_image(4, 4, [1, 2, 3]);
        assert!(matches!(
            describe_patch(&image, &BinaryMask::new(4, 4)),
            Err(EmbedError::EmptyMask)
        ));
        assert!(matches!(
            describe_patch(&image, &BinaryMask::new(5, 4)),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_pixel_mask_is_valid() {
        let image = solid_image(4, 4, [0, 255, 0]);
        let mut mask = BinaryMask::new(4, 4);
        mask.set(2, 1, true);
        let desc = describe_patch(&image, &mask).unwrap();
        assert_eq!(desc.dim(), DESCRIPTOR_DIM);
        assert!((desc.values()[48 + 5] - 1.0).abs() < 1e-12, "all hue mass in green bin");
    }

    proptest! {
        #[test]
        fn descriptor_values_are_normalized_for_random_patches(
            seed_bytes in proptest::collection::vec(0u8..=255, 27),
            mask_bits in proptest::collection::vec(any::<bool>(), 9),
        ) {
            prop_assume!(mask_bits.iter().any(|&b| b));
            let image = ColorImage::from_raw(3, 3, seed_bytes);
            let mask = BinaryMask::from_raw(3, 3, mask_bits);
            let desc = describe_patch(&image, &mask).unwrap();
            prop_assert_eq!(desc.dim(), DESCRIPTOR_DIM);
            prop_assert!(desc.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
            let hue_sum: f64 = desc.values()[48..].iter().sum();
            prop_assert!((hue_sum - 1.0).abs() < 1e-9);
        }
    }
}
