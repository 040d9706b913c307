//! Deterministic fixtures for the pipeline benchmarks: a mid-size synthetic
//! scene, an embedding net, a populated gallery, and a triplet batch.

use segmeld_core::embed::{describe_patch, EmbeddingNet, Triplet, DESCRIPTOR_DIM};
use segmeld_core::gallery::Gallery;
use segmeld_core::hierarchy::{extract_proposals, HierarchyConfig};
use segmeld_core::raster::{
    generate_scene, BinaryMask, ClassId, ClassRegistry, Scene, SceneSpec, ShapeKind,
};
use segmeld_core::train::{sample_triplets, PatchDataset};
use std::collections::BTreeMap;

pub const SCENE_SIDE: usize = 96;

fn palette() -> BTreeMap<ClassId, [u8; 3]> {
    [
        (1, [217, 33, 33]),
        (2, [217, 171, 33]),
        (3, [125, 217, 33]),
        (4, [33, 217, 79]),
        (5, [33, 217, 217]),
        (6, [33, 79, 217]),
        (7, [125, 33, 217]),
        (8, [217, 33, 171]),
    ]
    .into_iter()
    .collect()
}

pub fn registry() -> ClassRegistry {
    let mut registry = ClassRegistry::new();
    for id in 1..=8 {
        registry.register(id, &format!("item-{id}")).unwrap();
    }
    registry
}

pub fn scene(seed: u64) -> Scene {
    let spec = SceneSpec {
        width: SCENE_SIDE,
        height: SCENE_SIDE,
        min_items: 3,
        max_items: 6,
        shapes: vec![ShapeKind::Rectangle, ShapeKind::Ellipse],
        colors: palette(),
        noise: 0.03,
        allow_occlusion: false,
        seed,
    };
    generate_scene(&spec, &registry()).unwrap()
}

/// An initialized (untrained) net: forward cost is identical either way.
pub fn net() -> EmbeddingNet {
    EmbeddingNet::init(&[DESCRIPTOR_DIM, 32, 8], 0)
}

/// A gallery of `entries` embeddings harvested from scene patches, cycling
/// through the classes visible in consecutive seeded scenes.
pub fn gallery(net: &EmbeddingNet, entries: usize) -> Gallery {
    let mut gallery = Gallery::new();
    let mut seed = 0;
    while gallery.len() < entries {
        let scene = scene(seed);
        for &class in &scene.present {
            if gallery.len() == entries {
                break;
            }
            let mask = scene.labels.class_mask(class);
            gallery.enroll(&scene.image, &mask, class, net).unwrap();
        }
        seed += 1;
    }
    gallery
}

pub fn triplets(count: usize) -> Vec<Triplet> {
    let mut dataset = PatchDataset::new();
    let mut seed = 100;
    while dataset.classes().iter().filter(|&&c| dataset.members(c).len() >= 2).count() < 2
        || dataset.len() < 24
    {
        let scene = scene(seed);
        for &class in &scene.present {
            let mask = scene.labels.class_mask(class);
            dataset.add(describe_patch(&scene.image, &mask).unwrap(), class).unwrap();
        }
        seed += 1;
    }
    sample_triplets(&dataset, count, 7).unwrap()
}

/// Proposal masks of `scene` with their k-NN labels, ready for vote tallying.
pub fn votes(
    scene: &Scene,
    net: &EmbeddingNet,
    gallery: &Gallery,
) -> Vec<(BinaryMask, Vec<ClassId>)> {
    extract_proposals(&scene.boundary, &HierarchyConfig::default())
        .into_iter()
        .map(|proposal| {
            let descriptor = describe_patch(&scene.image, &proposal.mask).unwrap();
            let embedding = net.forward(descriptor.values()).unwrap();
            let labels = gallery
                .classify(&embedding, 3)
                .unwrap()
                .into_iter()
                .map(|(class, _)| class)
                .collect();
            (proposal.mask, labels)
        })
        .collect()
}
