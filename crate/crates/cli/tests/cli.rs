//! End-to-end checks of the segmeld binary: argument handling, config file
//! layering, and the on-disk contracts of each subcommand.

use segmeld_core::raster::{
    read_pgm16_labels, write_pgm16_labels, write_pgm16_mask, BinaryMask, LabelMap,
};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn segmeld(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segmeld"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary should spawn")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_registry(dir: &Path, ids: &[u32]) -> String {
    let classes: Vec<serde_json::Value> = ids
        .iter()
        .map(|id| serde_json::json!({"id": id, "name": format!("item-{id}")}))
        .collect();
    let doc = serde_json::json!({"format": "class-registry-v1", "classes": classes});
    let path = dir.join("registry.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn write_scene_config(dir: &Path, extra_scene_fields: serde_json::Value) -> String {
    let mut scene = serde_json::json!({
        "width": 48,
        "height": 48,
        "colors": {"1": [210, 40, 40], "2": [40, 210, 40], "3": [40, 40, 210]},
        "noise": 0.02
    });
    if let (Some(base), Some(extra)) = (scene.as_object_mut(), extra_scene_fields.as_object()) {
        for (key, value) in extra {
            base.insert(key.clone(), value.clone());
        }
    }
    let doc = serde_json::json!({"gen_synth": {"scene": scene}});
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn missing_required_inputs_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = segmeld(&["segment"], dir.path());
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.contains("missing scene image (--image)"), "got: {err}");

    let out = segmeld(&["gen-synth", "--out", "scenes"], dir.path());
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("--registry"));
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1, 2, 3]);
    let config = serde_json::json!({
        "gen_synth": {
            "out_dir": "from_config",
            "registry": registry,
            "scenes": 2,
            "scene": {"width": 32, "height": 32, "colors": {"1": [200, 30, 30]}}
        }
    });
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();

    let out = segmeld(&["--config", "config.json", "gen-synth"], dir.path());
    assert_ok(&out);
    assert!(dir.path().join("from_config/manifest.json").exists());
    assert!(dir.path().join("from_config/scene_0001.ppm").exists());

    // The --out flag redirects away from the config's directory, and --scenes
    // overrides its count.
    let out = segmeld(
        &["--config", "config.json", "gen-synth", "--out", "from_flag", "--scenes", "1"],
        dir.path(),
    );
    assert_ok(&out);
    assert!(dir.path().join("from_flag/scene_0000.ppm").exists());
    assert!(!dir.path().join("from_flag/scene_0001.ppm").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, r#"{"gen_synth": {"out_dirr": "x"}}"#).unwrap();
    let out = segmeld(&["--config", "config.json", "gen-synth"], dir.path());
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.contains("unknown field"), "typo should be reported: {err}");
}

#[test]
fn gen_synth_writes_scene_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1, 2, 3]);
    let config = write_scene_config(dir.path(), serde_json::json!({}));
    let out = segmeld(
        &[
            "--config", &config, "gen-synth", "--out", "scenes", "--registry", &registry,
            "--scenes", "3", "--seed", "5",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scenes/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["format"], "scene-manifest-v1");
    assert_eq!(manifest["seed"], 5);
    let scenes = manifest["scenes"].as_array().unwrap();
    assert_eq!(scenes.len(), 3);
    for scene in scenes {
        for key in ["image", "labels", "boundary"] {
            let file = scene[key].as_str().unwrap();
            assert!(dir.path().join("scenes").join(file).exists(), "{file} missing");
        }
        let labels = read_pgm16_labels(
            dir.path().join("scenes").join(scenes[0]["labels"].as_str().unwrap()),
        )
        .unwrap();
        assert_eq!((labels.width(), labels.height()), (48, 48));
    }
}

#[test]
fn gen_synth_sweep_fixes_item_counts_per_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1, 2, 3]);
    let config = write_scene_config(dir.path(), serde_json::json!({"allow_occlusion": true}));
    let out = segmeld(
        &[
            "--config", &config, "gen-synth", "--out", "sweep", "--registry", &registry,
            "--scenes", "2", "--seed", "9", "--sweep", "1,3",
        ],
        dir.path(),
    );
    assert_ok(&out);
    for (count, name) in [(1, "manifest_items_01.json"), (3, "manifest_items_03.json")] {
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("sweep").join(name)).unwrap())
                .unwrap();
        let scenes = manifest["scenes"].as_array().unwrap();
        assert_eq!(scenes.len(), 2, "{name} should list two scenes");
        for scene in scenes {
            assert_eq!(scene["item_count"], count, "{name} fixes the item count");
        }
    }
}

#[test]
fn train_requires_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = segmeld(&["train", "--data", "empty", "--out", "net.json"], dir.path());
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("manifest.json"));
}

#[test]
fn enroll_rejects_an_empty_capture_list() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("caps")).unwrap();
    fs::write(
        dir.path().join("caps/captures.json"),
        r#"{"format": "captures-manifest-v1", "captures": []}"#,
    )
    .unwrap();
    fs::write(dir.path().join("net.json"), "{}").unwrap();
    let out = segmeld(
        &["enroll", "--captures", "caps", "--net", "net.json", "--out", "gallery.json"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("no captures"));
}

/// Runs the generation-to-segmentation path once and returns the scene dir.
fn generate_and_train(dir: &Path) -> (String, String) {
    let registry = write_registry(dir, &[1, 2, 3]);
    let config = write_scene_config(dir, serde_json::json!({"min_items": 2, "max_items": 3}));
    assert_ok(&segmeld(
        &[
            "--config", &config, "gen-synth", "--out", "scenes", "--registry", &registry,
            "--scenes", "4", "--seed", "21",
        ],
        dir,
    ));
    assert_ok(&segmeld(
        &["train", "--data", "scenes", "--out", "net.json", "--epochs", "3", "--seed", "1"],
        dir,
    ));
    (registry, config)
}

fn enroll_from_scene_labels(dir: &Path) {
    // Single-item scene labels double as capture masks: any nonzero pixel is
    // foreground and the manifest records the class.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("views/manifest.json")).unwrap())
            .unwrap();
    let captures: Vec<serde_json::Value> = manifest["scenes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            serde_json::json!({
                "image": s["image"],
                "mask": s["labels"],
                "class_id": s["present"][0]
            })
        })
        .collect();
    let doc = serde_json::json!({"format": "captures-manifest-v1", "captures": captures});
    fs::write(dir.join("views/captures.json"), serde_json::to_string_pretty(&doc).unwrap())
        .unwrap();
    assert_ok(&segmeld(
        &["enroll", "--captures", "views", "--net", "net.json", "--out", "gallery.json"],
        dir,
    ));
}

#[test]
fn segment_honors_the_expected_class_filter() {
    let dir = tempfile::tempdir().unwrap();
    let (registry, _) = generate_and_train(dir.path());
    let views_config = write_scene_config(
        dir.path(),
        serde_json::json!({"min_items": 1, "max_items": 1}),
    );
    assert_ok(&segmeld(
        &[
            "--config", &views_config, "gen-synth", "--out", "views", "--registry", &registry,
            "--scenes", "9", "--seed", "70",
        ],
        dir.path(),
    ));
    enroll_from_scene_labels(dir.path());

    assert_ok(&segmeld(
        &[
            "segment", "--image", "scenes/scene_0000.ppm", "--boundary",
            "scenes/scene_0000_boundary.pgm", "--net", "net.json", "--gallery", "gallery.json",
            "--out", "pred.pgm",
        ],
        dir.path(),
    ));
    let unfiltered = read_pgm16_labels(dir.path().join("pred.pgm")).unwrap();
    assert!(!unfiltered.class_ids().is_empty(), "some class should win somewhere");

    // Restricting to a class with no votes leaves everything background.
    assert_ok(&segmeld(
        &[
            "segment", "--image", "scenes/scene_0000.ppm", "--boundary",
            "scenes/scene_0000_boundary.pgm", "--net", "net.json", "--gallery", "gallery.json",
            "--out", "pred_none.pgm", "--expected", "999",
        ],
        dir.path(),
    ));
    let filtered = read_pgm16_labels(dir.path().join("pred_none.pgm")).unwrap();
    assert!(filtered.class_ids().is_empty(), "unexpected classes may not win votes");
}

#[test]
fn segment_dumps_proposals_and_scores_that_refuse_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (registry, _) = generate_and_train(dir.path());
    let views_config = write_scene_config(
        dir.path(),
        serde_json::json!({"min_items": 1, "max_items": 1}),
    );
    assert_ok(&segmeld(
        &[
            "--config", &views_config, "gen-synth", "--out", "views", "--registry", &registry,
            "--scenes", "9", "--seed", "70",
        ],
        dir.path(),
    ));
    enroll_from_scene_labels(dir.path());

    assert_ok(&segmeld(
        &[
            "segment", "--image", "scenes/scene_0001.ppm", "--boundary",
            "scenes/scene_0001_boundary.pgm", "--net", "net.json", "--gallery", "gallery.json",
            "--out", "pred.pgm", "--dump-proposals", "props", "--scores-out", "scores",
        ],
        dir.path(),
    ));
    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("props/index.json")).unwrap())
            .unwrap();
    assert_eq!(index["format"], "proposal-index-v1");
    assert!(!index["proposals"].as_array().unwrap().is_empty());

    assert_ok(&segmeld(
        &["fuse-scores", "--scores", "scores", "--out", "refused.pgm"],
        dir.path(),
    ));
    let direct = fs::read(dir.path().join("pred.pgm")).unwrap();
    let refused = fs::read(dir.path().join("refused.pgm")).unwrap();
    assert_eq!(direct, refused, "vote counts and score planes must pick the same labels");
}

#[test]
fn annotate_splits_masks_and_queues_the_unclear() {
    let dir = tempfile::tempdir().unwrap();
    let masks = dir.path().join("masks");
    fs::create_dir(&masks).unwrap();

    let mut two_items = BinaryMask::new(8, 4);
    for y in 0..4 {
        for x in 0..2 {
            two_items.set(x, y, true);
            two_items.set(x + 6, y, true);
        }
    }
    write_pgm16_mask(masks.join("pair.pgm"), &two_items).unwrap();

    let mut one_item = BinaryMask::new(8, 4);
    one_item.set(3, 1, true);
    write_pgm16_mask(masks.join("lonely.pgm"), &one_item).unwrap();

    let tasks = serde_json::json!({
        "format": "annotation-tasks-v1",
        "tasks": [
            {"mask": "pair.pgm", "labels": [7, 2]},
            {"mask": "lonely.pgm", "labels": [1, 2]}
        ]
    });
    fs::write(masks.join("tasks.json"), serde_json::to_string_pretty(&tasks).unwrap()).unwrap();

    let out = segmeld(&["annotate", "--masks", "masks", "--out", "done"], dir.path());
    assert_ok(&out);

    let labels = read_pgm16_labels(dir.path().join("done/pair_labels.pgm")).unwrap();
    assert_eq!(labels.get(0, 0), 7, "left component takes the first label");
    assert_eq!(labels.get(7, 0), 2, "right component takes the second label");
    assert!(!dir.path().join("done/lonely_labels.pgm").exists());

    let queue: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("done/review_queue.json")).unwrap())
            .unwrap();
    assert_eq!(queue["format"], "review-queue-v1");
    let items = queue["items"].as_array().unwrap();
    assert_eq!(items.len(), 1);
    assert_eq!(items[0]["source"], "lonely.pgm");
    assert_eq!(items[0]["reason"]["kind"], "component-count");
}

#[test]
fn evaluate_reports_a_missing_prediction_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1]);
    fs::create_dir(dir.path().join("gt")).unwrap();
    fs::create_dir(dir.path().join("pred")).unwrap();
    let gt = LabelMap::from_raw(2, 2, vec![1, 1, 0, 0]);
    write_pgm16_labels(dir.path().join("gt/a_labels.pgm"), &gt).unwrap();

    let out = segmeld(
        &[
            "evaluate", "--pred", "pred", "--gt", "gt", "--registry", &registry, "--out",
            "eval",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("a_labels.pgm"), "got: {}", stderr_of(&out));
}

#[test]
fn evaluate_ignore_list_excludes_classes_from_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1, 2]);
    fs::create_dir(dir.path().join("gt")).unwrap();
    fs::create_dir(dir.path().join("pred")).unwrap();
    // Class 1 is predicted perfectly, class 2 is missed entirely.
    let gt = LabelMap::from_raw(2, 2, vec![1, 1, 2, 2]);
    let pred = LabelMap::from_raw(2, 2, vec![1, 1, 0, 0]);
    write_pgm16_labels(dir.path().join("gt/a_labels.pgm"), &gt).unwrap();
    write_pgm16_labels(dir.path().join("pred/a_labels.pgm"), &pred).unwrap();

    assert_ok(&segmeld(
        &[
            "evaluate", "--pred", "pred", "--gt", "gt", "--registry", &registry, "--out",
            "eval_all",
        ],
        dir.path(),
    ));
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("eval_all/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["mean_f05"].as_f64().unwrap(), 0.5, "one hit, one miss");

    assert_ok(&segmeld(
        &[
            "evaluate", "--pred", "pred", "--gt", "gt", "--registry", &registry, "--out",
            "eval_ignored", "--ignore", "0,2",
        ],
        dir.path(),
    ));
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("eval_ignored/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["mean_f05"].as_f64().unwrap(), 1.0, "class 2 no longer counts");
    assert!(dir.path().join("eval_ignored/report.csv").exists());
    assert!(dir.path().join("eval_ignored/clutter_curve.csv").exists());
}

#[test]
fn evaluate_uses_manifest_item_counts_for_the_clutter_curve() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1]);
    fs::create_dir(dir.path().join("gt")).unwrap();
    fs::create_dir(dir.path().join("pred")).unwrap();
    let gt = LabelMap::from_raw(2, 1, vec![1, 0]);
    write_pgm16_labels(dir.path().join("gt/s_labels.pgm"), &gt).unwrap();
    write_pgm16_labels(dir.path().join("pred/s_labels.pgm"), &gt).unwrap();
    let manifest = serde_json::json!({
        "format": "scene-manifest-v1",
        "seed": 0,
        "scenes": [{
            "image": "s.ppm", "labels": "s_labels.pgm", "boundary": "s_boundary.pgm",
            "present": [1], "item_count": 6
        }]
    });
    fs::write(dir.path().join("gt/manifest.json"), serde_json::to_string(&manifest).unwrap())
        .unwrap();

    assert_ok(&segmeld(
        &[
            "evaluate", "--pred", "pred", "--gt", "gt", "--registry", &registry, "--manifest",
            "gt/manifest.json", "--out", "eval",
        ],
        dir.path(),
    ));
    let curve = fs::read_to_string(dir.path().join("eval/clutter_curve.csv")).unwrap();
    assert_eq!(curve, "item_count,mean_f05\n6,1.000000\n");
}

#[test]
fn evaluate_writes_the_frequency_curve_when_appearances_are_given() {
    let dir = tempfile::tempdir().unwrap();
    let registry = write_registry(dir.path(), &[1, 2]);
    fs::create_dir(dir.path().join("gt")).unwrap();
    fs::create_dir(dir.path().join("pred")).unwrap();
    let gt = LabelMap::from_raw(2, 1, vec![1, 2]);
    write_pgm16_labels(dir.path().join("gt/s_labels.pgm"), &gt).unwrap();
    write_pgm16_labels(dir.path().join("pred/s_labels.pgm"), &gt).unwrap();
    fs::write(
        dir.path().join("appearances.json"),
        r#"{"format": "appearance-counts-v1", "counts": {"1": 3, "2": 12}}"#,
    )
    .unwrap();

    assert_ok(&segmeld(
        &[
            "evaluate", "--pred", "pred", "--gt", "gt", "--registry", &registry, "--out",
            "eval", "--appearances", "appearances.json",
        ],
        dir.path(),
    ));
    let curve = fs::read_to_string(dir.path().join("eval/frequency_curve.csv")).unwrap();
    assert_eq!(curve, "appearances,mean_f05\n3,1.000000\n12,1.000000\n");
}

#[test]
fn thread_cap_env_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_segmeld"))
        .args(["gen-synth", "--out", "x"])
        .env("SEGMELD_THREADS", "0")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("SEGMELD_THREADS"));
}
