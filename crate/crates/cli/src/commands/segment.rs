//! segment: boundary map to proposals, embeddings to votes, votes to labels.

use crate::config::{require, SegmentSection};
use anyhow::{Context, Result};
use rayon::prelude::*;
use segmeld_core::embed::{describe_patch, EmbeddingNet};
use segmeld_core::gallery::Gallery;
use segmeld_core::hierarchy::{export_proposals, extract_proposals, HierarchyConfig};
use segmeld_core::raster::{read_pgm16_boundary, read_ppm, write_pgm16_labels, ClassId};
use segmeld_core::vote::{accumulate, fuse, write_score_dir, ScoreMap};
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Scene image (P6 color file).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Boundary strength map (16-bit grayscale file).
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    gallery: Option<PathBuf>,
    /// Neighbors consulted per proposal.
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated boundary thresholds.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Comma-separated class ids expected in the scene.
    #[arg(long, value_delimiter = ',')]
    expected: Option<Vec<ClassId>>,
    /// Output label map.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export proposal masks to this directory.
    #[arg(long)]
    dump_proposals: Option<PathBuf>,
    /// Also export per-class score planes to this directory.
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

pub fn run(args: Args, section: SegmentSection) -> Result<()> {
    let image_path = require(args.image, section.image, "scene image (--image)")?;
    let boundary_path = require(args.boundary, section.boundary, "boundary map (--boundary)")?;
    let net_path = require(args.net, section.net, "network path (--net)")?;
    let gallery_path = require(args.gallery, section.gallery, "gallery path (--gallery)")?;
    let out_path = require(args.out, section.out, "output label path (--out)")?;
    let k = args.k.or(section.k).unwrap_or(3);

    let defaults = HierarchyConfig::default();
    let hierarchy = HierarchyConfig::new(
        args.thresholds
            .or(section.thresholds)
            .unwrap_or_else(HierarchyConfig::default_thresholds),
        section.min_area_fraction.unwrap_or(defaults.min_area_fraction()),
        section.max_area_fraction.unwrap_or(defaults.max_area_fraction()),
    )?;

    let image = read_ppm(&image_path)?;
    let boundary = read_pgm16_boundary(&boundary_path)?;
    let net = EmbeddingNet::from_json_file(&net_path)
        .with_context(|| format!("loading net {}", net_path.display()))?;
    let gallery = Gallery::from_json_file(&gallery_path)
        .with_context(|| format!("loading gallery {}", gallery_path.display()))?;
    let expected: BTreeSet<ClassId> = args
        .expected
        .or(section.expected)
        .map(|list| list.into_iter().collect())
        .unwrap_or_else(|| gallery.class_set());

    let proposals = extract_proposals(&boundary, &hierarchy);
    if let Some(dir) = args.dump_proposals.or(section.dump_proposals) {
        export_proposals(&dir, &proposals)?;
    }

    let votes: Vec<_> = proposals
        .par_iter()
        .map(|proposal| -> Result<_> {
            let descriptor = describe_patch(&image, &proposal.mask)?;
            let embedding = net.forward(descriptor.values())?;
            let hits = gallery.classify(&embedding, k)?;
            let labels: Vec<ClassId> = hits.into_iter().map(|(class, _)| class).collect();
            Ok((proposal.mask.clone(), labels))
        })
        .collect::<Result<_>>()?;

    let tally = accumulate(boundary.width(), boundary.height(), &votes)?;
    if let Some(dir) = args.scores_out.or(section.scores_out) {
        write_score_dir(&dir, &ScoreMap::from_tally(&tally))?;
    }
    let labels = fuse(&tally, &expected);
    write_pgm16_labels(&out_path, &labels)
        .with_context(|| format!("writing labels {}", out_path.display()))?;
    println!(
        "segmented {} proposals into {} labeled classes",
        votes.len(),
        labels.class_ids().len()
    );
    Ok(())
}
