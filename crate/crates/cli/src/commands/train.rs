//! train: fit the embedding network to descriptors from labeled scenes.

use crate::config::{require, TrainSection};
use crate::manifest::SceneManifest;
use anyhow::{bail, Context, Result};
use segmeld_core::embed::{describe_patch, EmbeddingNet, DESCRIPTOR_DIM};
use segmeld_core::raster::{read_pgm16_labels, read_ppm};
use segmeld_core::train::{train, PatchDataset, TrainConfig};
use std::fs;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Scene directory containing manifest.json.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output network JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn resolve_train_config(args: &Args, section: &TrainSection) -> TrainConfig {
    let defaults = TrainConfig::default();
    TrainConfig {
        epochs: args.epochs.or(section.epochs).unwrap_or(defaults.epochs),
        triplet_budget: section.triplet_budget.unwrap_or(defaults.triplet_budget),
        batch_size: section.batch_size.unwrap_or(defaults.batch_size),
        initial_lr: section.initial_lr.unwrap_or(defaults.initial_lr),
        lr_halving_period: section.lr_halving_period.unwrap_or(defaults.lr_halving_period),
        weight_decay: section.weight_decay.unwrap_or(defaults.weight_decay),
        seed: args.seed.or(section.seed).unwrap_or(defaults.seed),
        loss: section.loss.as_ref().map(|l| l.resolve()).unwrap_or_default(),
        layer_lr_multipliers: section.layer_lr_multipliers.clone(),
    }
}

/// Builds the dataset: one descriptor per visible class per scene, plus the
/// background region as class 0 when enabled.
fn build_dataset(
    data_dir: &PathBuf,
    include_background: bool,
) -> Result<PatchDataset> {
    let manifest = SceneManifest::load(&data_dir.join("manifest.json"))?;
    let mut dataset = PatchDataset::new();
    for entry in &manifest.scenes {
        let image = read_ppm(data_dir.join(&entry.image))?;
        let labels = read_pgm16_labels(data_dir.join(&entry.labels))?;
        for &class in &entry.present {
            let mask = labels.class_mask(class);
            let descriptor = describe_patch(&image, &mask)
                .with_context(|| format!("describing class {class} in {}", entry.image))?;
            dataset.add(descriptor, class)?;
        }
        if include_background {
            let mask = labels.class_mask(0);
            if !mask.is_empty() {
                dataset.add(describe_patch(&image, &mask)?, 0)?;
            }
        }
    }
    Ok(dataset)
}

pub fn run(args: Args, section: TrainSection) -> Result<()> {
    let data_dir = require(args.data.clone(), section.data_dir.clone(), "data directory (--data)")?;
    let out_net = require(args.out.clone(), section.out_net.clone(), "output net path (--out)")?;
    let config = resolve_train_config(&args, &section);
    let include_background = section.include_background.unwrap_or(true);

    let dataset = build_dataset(&data_dir, include_background)?;
    if dataset.is_empty() {
        bail!("no descriptors found under {}", data_dir.display());
    }

    let hidden = section.hidden_dims.clone().unwrap_or_else(|| vec![32]);
    let embedding_dim = section.embedding_dim.unwrap_or(8);
    let mut dims = vec![DESCRIPTOR_DIM];
    dims.extend(hidden);
    dims.push(embedding_dim);
    let net = EmbeddingNet::init(&dims, config.seed);

    let (net, trace) = train(net, &dataset, &config)?;
    net.to_json_file(&out_net)
        .with_context(|| format!("writing net {}", out_net.display()))?;

    let loss_csv = section.loss_csv.clone().unwrap_or_else(|| {
        let mut path = out_net.clone();
        path.set_extension("loss.csv");
        path
    });
    let mut csv = String::from("epoch,mean_loss\n");
    for (epoch, loss) in trace.iter().enumerate() {
        csv.push_str(&format!("{epoch},{loss:.6}\n"));
    }
    fs::write(&loss_csv, csv).with_context(|| format!("writing {}", loss_csv.display()))?;

    println!(
        "trained on {} descriptors for {} epochs; final mean loss {}",
        dataset.len(),
        trace.len(),
        trace.last().map(|l| format!("{l:.4}")).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}
