//! Exit-code contract and subcommand flows, driven through the compiled
//! binary.

use std::path::Path;
use std::process::{Command, Output};

use elseg::core::{load_mask, save_mask, BinaryMask};

fn elseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elseg"))
        .args(["--log-level", "warn"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(output: &Output, expected: i32, context: &str) {
    assert_eq!(
        output.status.code(),
        Some(expected),
        "{context}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn unknown_flag_exits_1_with_usage() {
    let out = elseg(&["--bogus"]);
    assert_code(&out, 1, "unknown flag");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn missing_manifest_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = elseg(&[
        "eval",
        "--manifest",
        "missing.json",
        "--pred",
        dir.path().to_str().unwrap(),
        "--out",
        dir.path().join("m.csv").to_str().unwrap(),
    ]);
    assert_code(&out, 2, "missing manifest");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing.json"), "{stderr}");
}

#[test]
fn version_prints_format_versions() {
    let out = elseg(&["--version"]);
    assert_code(&out, 0, "--version");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("formats:"), "{stdout}");
}

#[test]
fn infer_requires_a_prediction_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = elseg(&[
        "infer",
        "--image",
        "whatever.png",
        "--out",
        dir.path().join("m.png").to_str().unwrap(),
    ]);
    assert_code(&out, 1, "no source chosen");
}

#[test]
fn heatmap_rejects_out_of_range_clip() {
    let dir = tempfile::tempdir().unwrap();
    let out = elseg(&[
        "heatmap",
        "--masks",
        dir.path().to_str().unwrap(),
        "--clip",
        "150",
        "--out",
        dir.path().join("h.png").to_str().unwrap(),
        "--legend",
        dir.path().join("l.json").to_str().unwrap(),
    ]);
    assert_code(&out, 1, "clip out of range");
}

/// synth -> augment -> infer -> eval -> select -> heatmap -> correlate,
/// exercising every file interface end to end.
#[test]
fn full_subcommand_chain() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    // A tiny corpus from the built-in template.
    let out = elseg(&["synth", "--count", "6", "--out", &s(&corpus)]);
    assert_code(&out, 0, "synth");
    assert!(corpus.join("manifest.json").exists());
    assert!(corpus.join("spec.json").exists());
    assert!(corpus.join("module_0005_droplet.png").exists());

    // Augment with a light config to keep the run snappy.
    let aug_cfg = root.join("aug.json");
    std::fs::write(
        &aug_cfg,
        r#"{"scale_range": [1.0, 1.0], "scale_steps": 1, "alpha_steps": 1,
            "window_size": 128, "window_shift": 100, "min_defect_pixels": 60,
            "mirror": "horizontal", "shuffle_seed": 5}"#,
    )
    .unwrap();
    let patches = root.join("patches");
    let out = elseg(&[
        "augment",
        "--manifest",
        &s(&corpus.join("manifest.json")),
        "--config",
        &s(&aug_cfg),
        "--out",
        &s(&patches),
        "--kind",
        "shunt",
    ]);
    assert_code(&out, 0, "augment");
    let provenance = std::fs::read_to_string(patches.join("provenance.jsonl")).unwrap();
    let lines: Vec<&str> = provenance.lines().collect();
    assert!(!lines.is_empty(), "augment produced no patches");
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(patches.join(first["image"].as_str().unwrap()).exists());
    assert!(first["defect_pixels"].as_u64().unwrap() >= 60);

    // Reference inference over the corpus images.
    let preds = root.join("preds");
    std::fs::create_dir_all(&preds).unwrap();
    for i in 0..6 {
        let image = corpus.join(format!("module_000{i}.png"));
        let out_mask = preds.join(format!("module_000{i}.png"));
        let out = elseg(&[
            "infer",
            "--image",
            &s(&image),
            "--reference",
            "shunt",
            "--out",
            &s(&out_mask),
        ]);
        assert_code(&out, 0, "infer");
        assert!(out_mask.exists());
    }

    // Score the shunt predictions.
    let metrics_csv = root.join("metrics.csv");
    let out = elseg(&[
        "eval",
        "--manifest",
        &s(&corpus.join("manifest.json")),
        "--pred",
        &s(&preds),
        "--out",
        &s(&metrics_csv),
        "--kind",
        "shunt",
        "--model-id",
        "reference-shunt",
    ]);
    assert_code(&out, 0, "eval");
    let csv_text = std::fs::read_to_string(&metrics_csv).unwrap();
    assert!(csv_text.starts_with("image_id,model_id,jaccard,precision,recall"));

    // Selection over the (single-model) table.
    let selection = root.join("selection.json");
    let pareto = root.join("pareto.svg");
    let out = elseg(&[
        "select",
        "--metrics",
        &s(&metrics_csv),
        "--out",
        &s(&selection),
        "--plot",
        &s(&pareto),
    ]);
    assert_code(&out, 0, "select");
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&selection).unwrap()).unwrap();
    assert_eq!(sel["best"], "reference-shunt");
    assert!(pareto.exists());

    // Heat map over the predictions.
    let hm = root.join("hm.png");
    let legend = root.join("legend.json");
    let out = elseg(&[
        "heatmap",
        "--masks",
        &s(&preds),
        "--scale",
        "log",
        "--clip",
        "1",
        "--out",
        &s(&hm),
        "--legend",
        &s(&legend),
    ]);
    assert_code(&out, 0, "heatmap");
    let legend: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&legend).unwrap()).unwrap();
    assert_eq!(legend["n_images"], 6);

    // Correlation against synthetic performance data.
    let perf = root.join("perf.csv");
    let mut perf_text = String::from("image_id,isc_slope\n");
    for i in 0..6 {
        perf_text.push_str(&format!("module_000{i},{}\n", -0.01 * (i + 1) as f64));
    }
    std::fs::write(&perf, perf_text).unwrap();
    let scatter = root.join("scatter.csv");
    let out = elseg(&[
        "correlate",
        "--masks",
        &s(&preds),
        "--performance",
        &s(&perf),
        "--key",
        "isc_slope",
        "--out",
        &s(&scatter),
    ]);
    assert_code(&out, 0, "correlate");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let result: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(result["joined"], 6);
    assert!(result["pearson_r"].as_f64().unwrap().abs() <= 1.0);
    assert!(scatter.exists());
}

#[test]
fn baseline_command_estimates_from_mask_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    std::fs::create_dir_all(&first).unwrap();
    std::fs::create_dir_all(&second).unwrap();
    for i in 0..3 {
        let a = BinaryMask::from_fn(32, 32, |x, y| (x / 4 + y / 4 + i) % 3 == 0).unwrap();
        let b = BinaryMask::from_fn(32, 32, |x, y| (x / 4 + y / 4 + i) % 3 == 0 && x < 28).unwrap();
        save_mask(&a, first.join(format!("img_{i}.png"))).unwrap();
        save_mask(&b, second.join(format!("img_{i}.png"))).unwrap();
    }
    let out_path = dir.path().join("baseline.json");
    let out = elseg(&[
        "baseline",
        "--first",
        first.to_str().unwrap(),
        "--second",
        second.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "baseline");
    let baseline: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    for key in ["precision", "recall", "jaccard"] {
        let v = baseline[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
}

#[test]
fn external_predictions_round_trip_through_infer() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // One synthetic module to segment.
    let out = elseg(&["synth", "--count", "1", "--out", root.join("c").to_str().unwrap()]);
    assert_code(&out, 0, "synth");
    let image = root.join("c").join("module_0000.png");

    // First pass dumps the tiles an external model would need.
    let tiles = root.join("tiles");
    let preds = root.join("preds");
    let out = elseg(&[
        "infer",
        "--image",
        image.to_str().unwrap(),
        "--model",
        "resnet+unet@256",
        "--predictions",
        preds.to_str().unwrap(),
        "--dump-patches",
        tiles.to_str().unwrap(),
        "--out",
        root.join("mask.png").to_str().unwrap(),
    ]);
    assert_code(&out, 2, "predictions missing on first pass");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no stored prediction"), "{stderr}");

    // Stand in for the external run: answer every dumped tile with an
    // all-true mask named by its content hash.
    let model_dir = preds.join("resnet+unet@256");
    std::fs::create_dir_all(&model_dir).unwrap();
    let mut tile_count = 0;
    for entry in std::fs::read_dir(&tiles).unwrap() {
        let tile = entry.unwrap().path();
        let full = BinaryMask::from_fn(256, 256, |_, _| true).unwrap();
        save_mask(&full, model_dir.join(tile.file_name().unwrap())).unwrap();
        tile_count += 1;
    }
    assert!(tile_count >= 4);

    let out = elseg(&[
        "infer",
        "--image",
        image.to_str().unwrap(),
        "--model",
        "resnet+unet@256",
        "--predictions",
        preds.to_str().unwrap(),
        "--out",
        root.join("mask.png").to_str().unwrap(),
    ]);
    assert_code(&out, 0, "second pass with stored predictions");
    let mask = load_mask(root.join("mask.png")).unwrap();
    // All-true tile predictions OR together into an all-true module mask.
    assert_eq!(mask.count_true(), mask.width() * mask.height());
}

#[test]
fn e2e_with_zero_defects_still_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"modules": 4, "shunts_per_image": 0, "droplets_per_image": 0,
            "threshold_sigmas": [5.0], "sample_patches": 0}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = elseg(&[
        "e2e",
        "--out",
        out_dir.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_code(&out, 0, "zero-defect e2e");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    // Selection is impossible (all metrics undefined) but the run completes.
    for kind in report["kinds"].as_array().unwrap() {
        assert!(kind["selection"].is_null());
    }
    // The metrics table records the undefined precision cells as empty.
    let csv_text = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let data_line = csv_text.lines().nth(1).unwrap();
    assert!(data_line.ends_with(",,") || data_line.contains(",,"), "{data_line}");
}
