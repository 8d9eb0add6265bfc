//! End-to-end CLI checks: exit codes, run-directory contents, dataset
//! validation errors.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advtex"))
}

fn write_pattern(path: &Path, size: usize) {
    advtex::io::write_png(path, &advtex::synth::test_pattern(size, 7)).unwrap();
}

#[test]
fn unknown_command_fails_with_usage() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("Usage") || msg.contains("usage"), "{msg}");
}

#[test]
fn gen2d_writes_observations_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.png");
    write_pattern(&gt, 48);
    let dataset = tmp.path().join("d");
    let out = bin()
        .args(["gen2d", "--input"])
        .arg(&gt)
        .args(["--num", "16", "--max-shift", "16", "--seed", "7", "--out"])
        .arg(&dataset)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for i in 0..16 {
        assert!(dataset.join(format!("views/{i:04}.color.png")).exists());
    }
    assert!(dataset.join("config.json").exists());
    assert!(dataset.join("version.txt").exists());
    let manifest = advtex::io::dataset::read_manifest(&dataset).unwrap();
    assert_eq!(manifest.view_count, 16);
    let offsets = manifest.offsets.unwrap();
    assert_eq!(offsets.len(), 16);
    assert!(offsets.iter().all(|o| o[0].abs() <= 16 && o[1].abs() <= 16));
}

#[test]
fn optimize_is_deterministic_across_runs_without_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.png");
    write_pattern(&gt, 72);
    let dataset = tmp.path().join("d");
    assert!(bin()
        .args(["gen2d", "--input"])
        .arg(&gt)
        .args(["--num", "3", "--max-shift", "3", "--seed", "2", "--out"])
        .arg(&dataset)
        .status()
        .unwrap()
        .success());

    let run = |out_dir: &Path| {
        assert!(bin()
            .args(["optimize", "--dataset"])
            .arg(&dataset)
            .args(["--steps", "40", "--seed", "5", "--snapshot-interval", "20", "--out"])
            .arg(out_dir)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap()
            .success());
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&a);
    run(&b);
    assert_eq!(
        std::fs::read(a.join("texture.png")).unwrap(),
        std::fs::read(b.join("texture.png")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("loss.csv")).unwrap(),
        std::fs::read(b.join("loss.csv")).unwrap()
    );
}

#[test]
fn evaluate_emits_metric_report_json() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.png");
    let b = tmp.path().join("b.png");
    write_pattern(&a, 32);
    advtex::io::write_png(&b, &advtex::synth::test_pattern(32, 8)).unwrap();
    let report_path = tmp.path().join("report.json");
    let out = bin()
        .args(["evaluate", "--generated"])
        .arg(&a)
        .arg("--reference")
        .arg(&b)
        .args(["--patch", "7", "--window", "12", "--out"])
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: advtex::metrics::MetricReport =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert!(report.nearest_patch <= report.exact_patch);
    assert_eq!(report.patch_size, 7);
    assert_eq!(report.search_window, 12);
}

#[test]
fn render_writes_one_image_per_camera() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh_path = tmp.path().join("sphere.obj");
    advtex::io::write_obj(&mesh_path, &advtex::synth::uv_sphere(8, 12, 0.5)).unwrap();
    let tex_path = tmp.path().join("tex.png");
    write_pattern(&tex_path, 32);
    let cam_path = tmp.path().join("cam.json");
    let cam = advtex::geom::Camera::look_at(
        advtex::geom::Intrinsics::square(48, 60.0),
        advtex::geom::vec3(0.0, -2.0, 1.0),
        advtex::geom::vec3(0.0, 0.0, 0.0),
    );
    advtex::io::write_camera_json(&cam_path, &cam).unwrap();

    let out_dir = tmp.path().join("renders");
    let out = bin()
        .args(["render", "--mesh"])
        .arg(&mesh_path)
        .arg("--texture")
        .arg(&tex_path)
        .arg("--camera")
        .arg(&cam_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = advtex::io::read_png(&out_dir.join("render_0000.png")).unwrap();
    assert_eq!((img.width, img.height), (48, 48));
    // the sphere must actually appear (non-black pixels)
    assert!(img.data.iter().any(|&v| v > 0.05));
}

#[test]
fn optimize_rejects_invalid_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("nonexistent");
    let out = bin()
        .args(["optimize", "--dataset"])
        .arg(&dataset)
        .args(["--steps", "5", "--out"])
        .arg(tmp.path().join("r"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn optimize_honors_config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let gt = tmp.path().join("gt.png");
    write_pattern(&gt, 70);
    let dataset = tmp.path().join("d");
    assert!(bin()
        .args(["gen2d", "--input"])
        .arg(&gt)
        .args(["--num", "2", "--max-shift", "2", "--seed", "1", "--out"])
        .arg(&dataset)
        .status()
        .unwrap()
        .success());

    let config_path = tmp.path().join("config.json");
    std::fs::write(&config_path, r#"{"steps": 7, "l1_only": true, "seed": 33}"#).unwrap();
    let run_dir = tmp.path().join("r");
    assert!(bin()
        .args(["optimize", "--dataset"])
        .arg(&dataset)
        .arg("--config")
        .arg(&config_path)
        .args(["--steps", "9", "--out"]) // flag overrides the file
        .arg(&run_dir)
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap()
        .success());
    let echoed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(run_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["total_steps"], 9);
    assert_eq!(echoed["l1_only"], true);
    assert_eq!(echoed["seed"], 33);
}
