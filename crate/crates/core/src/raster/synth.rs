//! Synthetic desk-scene generator: colored shapes on a gray background with
//! aligned label, boundary, and presence ground truth.

use super::{BoundaryMap, ClassId, ClassRegistry, ColorImage, LabelMap, RasterError};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Flat backdrop color for unoccupied pixels.
pub const BACKGROUND_COLOR: [u8; 3] = [96, 96, 96];

/// Per-item placement retries before giving up on a non-overlapping layout.
const MAX_PLACEMENT_ATTEMPTS: usize = 100;

/// Item side lengths are drawn from this fraction range of the shorter image
/// side, keeping shapes well inside the proposal size filter.
const MIN_SIDE_FRACTION: f64 = 0.15;
const MAX_SIDE_FRACTION: f64 = 0.40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

fn default_shapes() -> Vec<ShapeKind> {
    vec![ShapeKind::Rectangle, ShapeKind::Ellipse]
}

/// Free parameters of one generated scene. The same spec always yields the
/// same scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Inclusive range for the number of items to place.
    pub min_items: usize,
    pub max_items: usize,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<ShapeKind>,
    /// Explicit item colors per class id; unlisted classes get a color derived
    /// from their id.
    #[serde(default)]
    pub colors: BTreeMap<ClassId, [u8; 3]>,
    /// Amplitude of uniform noise, as a fraction of full scale, applied to
    /// both image channels and boundary strengths.
    #[serde(default)]
    pub noise: f64,
    /// When false, items must not overlap previously placed ones.
    #[serde(default)]
    pub allow_occlusion: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), RasterError> {
        let fail = |msg: String| Err(RasterError::InvalidSceneSpec(msg));
        if self.width < 8 || self.height < 8 {
            return fail(format!("image size {}x{} is below 8x8", self.width, self.height));
        }
        if self.min_items > self.max_items {
            return fail(format!(
                "empty item count range {}..={}",
                self.min_items, self.max_items
            ));
        }
        if self.shapes.is_empty() {
            return fail("shape set is empty".to_string());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail(format!("noise amplitude {} outside [0, 1]", self.noise));
        }
        Ok(())
    }
}

/// One generated scene with pixel-aligned ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: ColorImage,
    pub labels: LabelMap,
    pub boundary: BoundaryMap,
    /// Nonzero class ids that remain visible in `labels`.
    pub present: BTreeSet<ClassId>,
    /// Number of items placed, including any later fully occluded.
    pub item_count: usize,
}

/// Deterministic fallback color for classes without a palette entry. Hues
/// step by 79 degrees so nearby ids stay far apart on the color wheel.
pub(crate) fn color_for_class(id: ClassId) -> [u8; 3] {
    let hue = f64::from(id.wrapping_mul(79) % 360);
    hsv_to_rgb(hue, 0.75, 0.85)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to_byte = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to_byte(r), to_byte(g), to_byte(b)]
}

struct Placement {
    class: ClassId,
    pixels: Vec<usize>,
}

fn shape_pixels(
    kind: ShapeKind,
    x0: usize,
    y0: usize,
    iw: usize,
    ih: usize,
    width: usize,
) -> Vec<usize> {
    let mut pixels = Vec::with_capacity(iw * ih);
    match kind {
        ShapeKind::Rectangle => {
            for y in y0..y0 + ih {
                for x in x0..x0 + iw {
                    pixels.push(y * width + x);
                }
            }
        }
        ShapeKind::Ellipse => {
            let cx = x0 as f64 + (iw as f64 - 1.0) / 2.0;
            let cy = y0 as f64 + (ih as f64 - 1.0) / 2.0;
            let a = iw as f64 / 2.0;
            let b = ih as f64 / 2.0;
            for y in y0..y0 + ih {
                for x in x0..x0 + iw {
                    let dx = (x as f64 - cx) / a;
                    let dy = (y as f64 - cy) / b;
                    if dx * dx + dy * dy <= 1.0 {
                        pixels.push(y * width + x);
                    }
                }
            }
        }
    }
    pixels
}

/// Generates a scene from `spec`, drawing classes uniformly from `registry`.
/// Later items paint over earlier ones when occlusion is allowed; otherwise
/// placements are retried until disjoint or `InfeasiblePlacement` is raised.
pub fn generate_scene(spec: &SceneSpec, registry: &ClassRegistry) -> Result<Scene, RasterError> {
    spec.validate()?;
    if registry.is_empty() && spec.max_items > 0 {
        return Err(RasterError::InvalidSceneSpec(
            "registry has no classes to draw items from".to_string(),
        ));
    }
    let (width, height) = (spec.width, spec.height);
    let class_pool: Vec<ClassId> = registry.ids().collect();
    let min_dim = width.min(height) as f64;
    let side_lo = ((min_dim * MIN_SIDE_FRACTION).round() as usize).max(3);
    let side_hi = ((min_dim * MAX_SIDE_FRACTION).round() as usize).max(side_lo);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let item_count = rng.gen_range(spec.min_items..=spec.max_items);

    let mut labels = LabelMap::new(width, height);
    for item in 0..item_count {
        let mut placed = false;
        for _attempt in 0..MAX_PLACEMENT_ATTEMPTS {
            let class = class_pool[rng.gen_range(0..class_pool.len())];
            let kind = spec.shapes[rng.gen_range(0..spec.shapes.len())];
            let iw = rng.gen_range(side_lo..=side_hi);
            let ih = rng.gen_range(side_lo..=side_hi);
            let x0 = rng.gen_range(0..=width - iw);
            let y0 = rng.gen_range(0..=height - ih);
            let placement = Placement { class, pixels: shape_pixels(kind, x0, y0, iw, ih, width) };
            let occluded = placement.pixels.iter().any(|&i| labels.data()[i] != 0);
            if occluded && !spec.allow_occlusion {
                continue;
            }
            for &i in &placement.pixels {
                labels.set(i % width, i / width, placement.class);
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(RasterError::InfeasiblePlacement {
                item,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
    }

    let mut boundary = BoundaryMap::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let here = labels.get(x, y);
            let differs = (x > 0 && labels.get(x - 1, y) != here)
                || (x + 1 < width && labels.get(x + 1, y) != here)
                || (y > 0 && labels.get(x, y - 1) != here)
                || (y + 1 < height && labels.get(x, y + 1) != here);
            if differs {
                boundary.set(x, y, 1.0);
            }
        }
    }
    if spec.noise > 0.0 {
        for y in 0..height {
            for x in 0..width {
                let jitter = rng.gen_range(-spec.noise..=spec.noise);
                boundary.set(x, y, (boundary.get(x, y) + jitter).clamp(0.0, 1.0));
            }
        }
    }

    let mut image = ColorImage::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let id = labels.get(x, y);
            let base = if id == 0 {
                BACKGROUND_COLOR
            } else {
                spec.colors.get(&id).copied().unwrap_or_else(|| color_for_class(id))
            };
            let rgb = if spec.noise > 0.0 {
                let mut noisy = [0u8; 3];
                for (channel, out) in base.iter().zip(noisy.iter_mut()) {
                    let jitter = rng.gen_range(-spec.noise..=spec.noise) * 255.0;
                    *out = (f64::from(*channel) + jitter).round().clamp(0.0, 255.0) as u8;
                }
                noisy
            } else {
                base
            };
            image.set_pixel(x, y, rgb);
        }
    }

    let present = labels.class_ids();
    Ok(Scene { image, labels, boundary, present, item_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_registry() -> ClassRegistry {
        let mut reg = ClassRegistry::new();
        for id in 1..=5 {
            reg.register(id, &format!("item-{id}")).unwrap();
        }
        reg
    }

    fn base_spec() -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 48,
            min_items: 2,
            max_items: 4,
            shapes: default_shapes(),
            colors: BTreeMap::new(),
            noise: 0.03,
            allow_occlusion: false,
            seed: 11,
        }
    }

    #[test]
    fn same_spec_yields_identical_scene() {
        let reg = small_registry();
        let spec = base_spec();
        let a = generate_scene(&spec, &reg).unwrap();
        let b = generate_scene(&spec, &reg).unwrap();
        assert_eq!(a, b, "generation must be a pure function of the spec");
    }

    #[test]
    fn different_seeds_yield_different_labels() {
        let reg = small_registry();
        let mut spec = base_spec();
        let a = generate_scene(&spec, &reg).unwrap();
        spec.seed = 12;
        let b = generate_scene(&spec, &reg).unwrap();
        assert_ne!(a.labels, b.labels);
    }

    #[test]
    fn present_matches_label_map_contents() {
        let reg = small_registry();
        let scene = generate_scene(&base_spec(), &reg).unwrap();
        assert_eq!(scene.present, scene.labels.class_ids());
        assert!(!scene.present.is_empty());
        assert!(scene.present.iter().all(|id| reg.contains(*id)));
    }

    #[test]
    fn without_occlusion_item_masks_are_disjoint_and_counted() {
        let reg = small_registry();
        let mut spec = base_spec();
        spec.min_items = 4;
        spec.max_items = 4;
        let scene = generate_scene(&spec, &reg).unwrap();
        assert_eq!(scene.item_count, 4);
        let labeled: usize = scene.labels.data().iter().filter(|&&id| id != 0).count();
        let mask_total: usize =
            scene.present.iter().map(|&id| scene.labels.class_mask(id).area()).sum();
        assert_eq!(labeled, mask_total, "class masks must partition the labeled pixels");
    }

    #[test]
    fn boundary_band_separates_items_from_background() {
        let reg = small_registry();
        let mut spec = base_spec();
        spec.noise = 0.0;
        let scene = generate_scene(&spec, &reg).unwrap();
        for y in 0..spec.height {
            for x in 0..spec.width {
                let here = scene.labels.get(x, y);
                let edge = (x > 0 && scene.labels.get(x - 1, y) != here)
                    || (x + 1 < spec.width && scene.labels.get(x + 1, y) != here)
                    || (y > 0 && scene.labels.get(x, y - 1) != here)
                    || (y + 1 < spec.height && scene.labels.get(x, y + 1) != here);
                assert_eq!(scene.boundary.get(x, y), if edge { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn crowded_spec_without_occlusion_is_infeasible() {
        let reg = small_registry();
        let mut spec = base_spec();
        spec.width = 16;
        spec.height = 16;
        spec.min_items = 30;
        spec.max_items = 30;
        match generate_scene(&spec, &reg) {
            Err(RasterError::InfeasiblePlacement { attempts, .. }) => {
                assert_eq!(attempts, MAX_PLACEMENT_ATTEMPTS);
            }
            other => panic!("expected InfeasiblePlacement, got {other:?}"),
        }
    }

    #[test]
    fn occlusion_allows_dense_packing() {
        let reg = small_registry();
        let mut spec = base_spec();
        spec.width = 16;
        spec.height = 16;
        spec.min_items = 30;
        spec.max_items = 30;
        spec.allow_occlusion = true;
        let scene = generate_scene(&spec, &reg).unwrap();
        assert_eq!(scene.item_count, 30);
    }

    #[test]
    fn zero_items_gives_empty_scene() {
        let reg = small_registry();
        let mut spec = base_spec();
        spec.min_items = 0;
        spec.max_items = 0;
        spec.noise = 0.0;
        let scene = generate_scene(&spec, &reg).unwrap();
        assert!(scene.present.is_empty());
        assert_eq!(scene.item_count, 0);
        assert_eq!(scene.image.pixel(5, 5), BACKGROUND_COLOR);
        assert!(scene.boundary.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn validate_rejects_bad_specs() {
        let mut spec = base_spec();
        spec.min_items = 5;
        spec.max_items = 2;
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.shapes.clear();
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.noise = 1.5;
        assert!(spec.validate().is_err());
    }

    proptest! {
        #[test]
        fn generated_scenes_stay_in_range(seed in 0u64..500, noise in 0.0f64..0.5) {
            let reg = small_registry();
            let spec = SceneSpec { noise, seed, ..base_spec() };
            let scene = generate_scene(&spec, &reg).unwrap();
            prop_assert!(scene.boundary.data().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(scene.labels.data().iter().all(|&id| id == 0 || reg.contains(id)));
            prop_assert_eq!(scene.present, scene.labels.class_ids());
        }
    }
}
