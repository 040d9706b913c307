//! enroll: embed labeled capture views into a gallery.

use crate::config::{require, EnrollSection};
use crate::manifest::CaptureManifest;
use anyhow::{bail, Context, Result};
use segmeld_core::embed::EmbeddingNet;
use segmeld_core::gallery::Gallery;
use segmeld_core::raster::{read_pgm16_mask, read_ppm};
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Capture directory containing captures.json.
    #[arg(long)]
    captures: Option<PathBuf>,
    /// Trained network JSON.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Output gallery JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args, section: EnrollSection) -> Result<()> {
    let captures_dir =
        require(args.captures, section.captures_dir, "captures directory (--captures)")?;
    let net_path = require(args.net, section.net, "network path (--net)")?;
    let out_path = require(args.out, section.out_gallery, "output gallery path (--out)")?;

    let manifest = CaptureManifest::load(&captures_dir.join("captures.json"))?;
    if manifest.captures.is_empty() {
        bail!("no captures listed in {}", captures_dir.display());
    }
    let net = EmbeddingNet::from_json_file(&net_path)
        .with_context(|| format!("loading net {}", net_path.display()))?;

    let mut gallery = Gallery::new();
    for capture in &manifest.captures {
        let image = read_ppm(captures_dir.join(&capture.image))?;
        let mask = read_pgm16_mask(captures_dir.join(&capture.mask))?;
        gallery
            .enroll(&image, &mask, capture.class_id, &net)
            .with_context(|| format!("enrolling {}", capture.image))?;
    }
    gallery
        .to_json_file(&out_path)
        .with_context(|| format!("writing gallery {}", out_path.display()))?;
    println!(
        "enrolled {} views across {} classes",
        gallery.len(),
        gallery.class_set().len()
    );
    Ok(())
}
