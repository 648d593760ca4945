//! End-to-end CLI checks: synth -> validate -> featurize -> evaluate.

use std::path::Path;
use std::process::Command;

fn behavekit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_behavekit"))
}

fn write_generator_config(path: &Path, subjects: &[(&str, usize)], seed: u64) {
    let subjects: serde_json::Map<String, serde_json::Value> = subjects
        .iter()
        .map(|&(g, n)| (g.to_string(), serde_json::json!(n)))
        .collect();
    let cfg = serde_json::json!({
        "seed": seed,
        "subjects": subjects,
        "separation": 2.0,
        "frame_rate": 30.0,
        "frames_per_segment": 40,
        "dropout": 0.0,
    });
    std::fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

#[test]
fn synth_validate_featurize_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cohort_dir = dir.path().join("cohort");
    let gen_cfg = dir.path().join("gen.json");
    write_generator_config(&gen_cfg, &[("control", 4), ("asd", 4)], 21);

    let out = behavekit()
        .args(["synth", "--config"])
        .arg(&gen_cfg)
        .arg("--out")
        .arg(&cohort_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(cohort_dir.join("cohort.json").exists());
    assert!(cohort_dir.join("generator_config.json").exists());

    let out = behavekit()
        .args(["validate", "--cohort"])
        .arg(cohort_dir.join("cohort.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 8);

    let features_csv = dir.path().join("features.csv");
    let out = behavekit()
        .args(["featurize", "--cohort"])
        .arg(cohort_dir.join("cohort.json"))
        .arg("--out")
        .arg(&features_csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&features_csv).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9); // header + 8 subjects
    assert_eq!(lines[0].split(',').count(), 2978);

    // featurize reruns are byte-identical
    let features2 = dir.path().join("features2.csv");
    behavekit()
        .args(["featurize", "--cohort"])
        .arg(cohort_dir.join("cohort.json"))
        .arg("--out")
        .arg(&features2)
        .output()
        .unwrap();
    assert_eq!(csv, std::fs::read_to_string(&features2).unwrap());

    let pipeline_cfg = dir.path().join("pipeline.json");
    std::fs::write(
        &pipeline_cfg,
        serde_json::json!({
            "selection": {"max_features": 2, "inner_folds": 3, "fold_seed": 5},
            "grid": {"c_values": [1.0, 10.0], "gamma_values": [0.1, 1.0]},
            "grid_folds": 3,
            "grid_seed": 5,
        })
        .to_string(),
    )
    .unwrap();
    let report_dir = dir.path().join("report");
    let out = behavekit()
        .args(["evaluate", "--features"])
        .arg(&features_csv)
        .arg("--out")
        .arg(&report_dir)
        .arg("--config")
        .arg(&pipeline_cfg)
        .args(["--stage", "1", "--jobs", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Controls"));
    assert!(stdout.contains("Accuracy"));
    assert!(report_dir.join("report_stage1.json").exists());
    assert!(report_dir.join("tables.txt").exists());
    assert!(report_dir.join("scatter_stage1.csv").exists());
    assert!(report_dir.join("scatter_stage1.svg").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("report_stage1.json")).unwrap())
            .unwrap();
    assert_eq!(report["seed"], 5);
    assert!(report["config"].is_object());
    assert_eq!(report["report"]["leaky_selection"], false);

    // stage 2 needs comorbid subjects: protocol error, exit code 2
    let out = behavekit()
        .args(["evaluate", "--features"])
        .arg(&features_csv)
        .arg("--out")
        .arg(dir.path().join("report2"))
        .arg("--config")
        .arg(&pipeline_cfg)
        .args(["--stage", "2", "--jobs", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn paper_mode_is_labeled_in_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = dir.path().join("gen.json");
    write_generator_config(&gen_cfg, &[("control", 3), ("comorbid", 3)], 9);
    let cohort_dir = dir.path().join("cohort");
    behavekit()
        .args(["synth", "--config"])
        .arg(&gen_cfg)
        .arg("--out")
        .arg(&cohort_dir)
        .output()
        .unwrap();
    let pipeline_cfg = dir.path().join("pipeline.json");
    std::fs::write(
        &pipeline_cfg,
        serde_json::json!({
            "selection": {"max_features": 1, "inner_folds": 2},
            "grid": {"c_values": [1.0], "gamma_values": [1.0]},
            "grid_folds": 2,
        })
        .to_string(),
    )
    .unwrap();
    let report_dir = dir.path().join("report");
    let out = behavekit()
        .args(["evaluate", "--cohort"])
        .arg(cohort_dir.join("cohort.json"))
        .arg("--out")
        .arg(&report_dir)
        .arg("--config")
        .arg(&pipeline_cfg)
        .args(["--stage", "1", "--paper-mode", "--jobs", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tables = std::fs::read_to_string(report_dir.join("tables.txt")).unwrap();
    assert!(tables.contains("leakage: selection outside folds"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("report_stage1.json")).unwrap())
            .unwrap();
    assert_eq!(report["report"]["leaky_selection"], true);
}

#[test]
fn validate_flags_broken_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = dir.path().join("gen.json");
    write_generator_config(&gen_cfg, &[("control", 2)], 3);
    let cohort_dir = dir.path().join("cohort");
    behavekit()
        .args(["synth", "--config"])
        .arg(&gen_cfg)
        .arg("--out")
        .arg(&cohort_dir)
        .output()
        .unwrap();

    // drop a segment from one manifest: validation failure, exit 1
    let manifest_path = cohort_dir.join("ctl01.manifest.json");
    let mut manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    let segments = manifest["segments"].as_array().unwrap()[..11].to_vec();
    manifest["segments"] = serde_json::json!(segments);
    std::fs::write(&manifest_path, manifest.to_string()).unwrap();
    let out = behavekit()
        .args(["validate", "--cohort"])
        .arg(cohort_dir.join("cohort.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL ctl01"));
    assert!(stdout.contains("segments"));
    assert!(stdout.contains("PASS ctl02"));

    // missing frames file: I/O error, exit 3
    std::fs::remove_file(cohort_dir.join("ctl02.frames.jsonl")).unwrap();
    let out = behavekit()
        .args(["validate", "--cohort"])
        .arg(cohort_dir.join("cohort.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = dir.path().join("gen.json");
    write_generator_config(&gen_cfg, &[("control", 1), ("adhd", 1)], 77);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = behavekit()
            .args(["synth", "--config"])
            .arg(&gen_cfg)
            .arg("--out")
            .arg(out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for name in ["cohort.json", "ctl01.manifest.json", "ctl01.frames.jsonl", "adh01.frames.jsonl"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between runs");
    }
}

#[test]
fn synth_rejects_bad_config_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = dir.path().join("gen.json");
    std::fs::write(
        &gen_cfg,
        serde_json::json!({
            "seed": 1,
            "subjects": {"control": 1},
            "separation": 1.0,
            "frame_rate": 30.0,
            "frames_per_segment": 5,
            "dropout": 0.0,
        })
        .to_string(),
    )
    .unwrap();
    let out = behavekit()
        .args(["synth", "--config"])
        .arg(&gen_cfg)
        .arg("--out")
        .arg(dir.path().join("cohort"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frames_per_segment"));
}
