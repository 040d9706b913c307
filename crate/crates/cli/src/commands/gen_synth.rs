//! gen-synth: write synthetic scenes, their ground truth, and a manifest.

use crate::config::{require, GenSynthSection, SceneSection};
use crate::manifest::{SceneEntry, SceneManifest};
use anyhow::{Context, Result};
use segmeld_core::raster::{
    generate_scene, write_pgm16_boundary, write_pgm16_labels, write_ppm, ClassRegistry,
    SceneSpec, ShapeKind,
};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory for scenes and manifests.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Class registry JSON.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Number of scenes (per item count when sweeping).
    #[arg(long)]
    scenes: Option<usize>,
    /// Base seed; scene i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated item counts to sweep, one manifest each.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
}

fn resolve_spec(section: &SceneSection) -> Result<SceneSpec> {
    Ok(SceneSpec {
        width: section.width.context("missing scene.width in config")?,
        height: section.height.context("missing scene.height in config")?,
        min_items: section.min_items.unwrap_or(1),
        max_items: section.max_items.unwrap_or(4),
        shapes: section
            .shapes
            .clone()
            .unwrap_or_else(|| vec![ShapeKind::Rectangle, ShapeKind::Ellipse]),
        colors: section.colors.clone().unwrap_or_default(),
        noise: section.noise.unwrap_or(0.0),
        allow_occlusion: section.allow_occlusion.unwrap_or(false),
        seed: 0,
    })
}

fn write_scene(
    dir: &Path,
    stem: &str,
    spec: &SceneSpec,
    registry: &ClassRegistry,
) -> Result<SceneEntry> {
    let scene = generate_scene(spec, registry)?;
    let entry = SceneEntry {
        image: format!("{stem}.ppm"),
        labels: format!("{stem}_labels.pgm"),
        boundary: format!("{stem}_boundary.pgm"),
        present: scene.present.iter().copied().collect(),
        item_count: scene.item_count,
    };
    write_ppm(dir.join(&entry.image), &scene.image)?;
    write_pgm16_labels(dir.join(&entry.labels), &scene.labels)?;
    write_pgm16_boundary(dir.join(&entry.boundary), &scene.boundary)?;
    Ok(entry)
}

pub fn run(args: Args, section: GenSynthSection) -> Result<()> {
    let out_dir = require(args.out, section.out_dir.clone(), "output directory (--out)")?;
    let registry_path =
        require(args.registry, section.registry.clone(), "class registry (--registry)")?;
    let registry = ClassRegistry::from_json_file(&registry_path)
        .with_context(|| format!("loading registry {}", registry_path.display()))?;
    let scene_count = args.scenes.or(section.scenes).unwrap_or(1);
    let base_seed = args.seed.or(section.seed).unwrap_or(0);
    let sweep = args.sweep.or(section.sweep_item_counts.clone());
    let mut spec = resolve_spec(&section.scene.unwrap_or_default())?;

    fs::create_dir_all(&out_dir)?;
    match sweep {
        None => {
            let mut manifest = SceneManifest::new(base_seed);
            for i in 0..scene_count {
                spec.seed = base_seed + i as u64;
                let stem = format!("scene_{i:04}");
                manifest.scenes.push(write_scene(&out_dir, &stem, &spec, &registry)?);
            }
            manifest.save(&out_dir.join("manifest.json"))?;
            println!("wrote {} scenes to {}", scene_count, out_dir.display());
        }
        Some(counts) => {
            let mut offset = 0u64;
            for count in counts {
                let mut manifest = SceneManifest::new(base_seed);
                for i in 0..scene_count {
                    spec.min_items = count;
                    spec.max_items = count;
                    spec.seed = base_seed + offset + i as u64;
                    let stem = format!("scene_c{count:02}_{i:04}");
                    manifest.scenes.push(write_scene(&out_dir, &stem, &spec, &registry)?);
                }
                offset += scene_count as u64;
                manifest.save(&out_dir.join(format!("manifest_items_{count:02}.json")))?;
            }
            println!("wrote sweep manifests to {}", out_dir.display());
        }
    }
    Ok(())
}
