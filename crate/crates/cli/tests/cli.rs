use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pedem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedem")).args(args).output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_run_eval_bench() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, est, report, csv, svg) = (
        dir.path().join("scene.jsonl"),
        dir.path().join("est.jsonl"),
        dir.path().join("report.json"),
        dir.path().join("bins.csv"),
        dir.path().join("bins.svg"),
    );
    let scene = configs().join("scene.json");
    let camera = configs().join("camera.json");

    let out = pedem(&["simulate", "--config", s(&scene), "--seed", "3", "--out", s(&frames)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&frames).unwrap().lines().count(), 80);

    let out = pedem(&["run", "--input", s(&frames), "--camera", s(&camera), "--out", s(&est)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&est).unwrap().lines().count() > 0);

    let out = pedem(&[
        "eval", "--pred", s(&est), "--gt", s(&frames), "--out", s(&report), "--csv", s(&csv), "--svg", s(&svg),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["overall"]["count"].as_u64().unwrap() > 0);
    assert!(json["scenes"]["scene"].is_object());
    assert!(fs::read_to_string(&csv).unwrap().starts_with("bin_low,bin_high,mean_e_abs,count"));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let out = pedem(&["bench", "--input", s(&frames), "--camera", s(&camera), "--reps", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["reps"], 5);
    assert!(json["association_ms_per_frame"].as_f64().unwrap() >= 0.0);
}

#[test]
fn run_flags_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("scene.jsonl");
    let camera = configs().join("camera.json");
    let out = pedem(&["simulate", "--config", s(&configs().join("scene.json")), "--seed", "1", "--out", s(&frames)]);
    assert!(out.status.success());
    let run = |extra: &[&str], name: &str| {
        let est = dir.path().join(name);
        let mut args = vec!["run", "--input", s(&frames), "--camera", s(&camera), "--out", s(&est)];
        args.extend_from_slice(extra);
        let out = pedem(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(est).unwrap()
    };
    let default = run(&[], "a.jsonl");
    let from_file = run(&["--config", s(&configs().join("estimator.json"))], "b.jsonl");
    assert_eq!(default, from_file);
    let other = run(
        &["--no-refine", "--single-point", "--schedule", "paper-gain", "--steps", "3", "--scale-const", "4",
          "--drop-fraction", "0.2", "--height", "1.6"],
        "c.jsonl",
    );
    assert_ne!(default, other);
}

#[test]
fn empty_input_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let (input, est) = (dir.path().join("empty.jsonl"), dir.path().join("est.jsonl"));
    fs::write(&input, "").unwrap();
    let out = pedem(&["run", "--input", s(&input), "--camera", s(&configs().join("camera.json")), "--out", s(&est)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(est).unwrap(), "");
}

#[test]
fn schema_error_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let (input, est) = (dir.path().join("bad.jsonl"), dir.path().join("est.jsonl"));
    fs::write(&input, "{\"t\":0,\"ego\":{\"o\":[0,0,1.5],\"yaw\":0}}\n{\"t\":1,\"ego\":{}}\n").unwrap();
    let out = pedem(&["run", "--input", s(&input), "--camera", s(&configs().join("camera.json")), "--out", s(&est)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let missing = dir.path().join("missing.jsonl");
    let out = pedem(&["run", "--input", s(&missing), "--camera", s(&configs().join("camera.json")), "--out", s(&est)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let est = dir.path().join("est.jsonl");
    fs::write(&input, "").unwrap();
    let bad_cam = dir.path().join("cam.json");
    fs::write(&bad_cam, r#"{"width": 1600, "height": 900}"#).unwrap();
    let out = pedem(&["run", "--input", s(&input), "--camera", s(&bad_cam), "--out", s(&est)]);
    assert_eq!(out.status.code(), Some(2));

    let cam = configs().join("camera.json");
    let out = pedem(&["run", "--input", s(&input), "--camera", s(&cam), "--out", s(&est), "--height=-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("person_height"));

    let scene = dir.path().join("scene.json");
    fs::write(&scene, r#"{"duration": 1, "ego": {"waypoints": [[0,0]], "speed": 30}}"#).unwrap();
    let out = pedem(&["simulate", "--config", s(&scene), "--seed", "1", "--out", s(&est)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ego.speed"));

    let out = pedem(&["bench", "--input", s(&input), "--camera", s(&cam), "--reps", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pedem(&["eval", "--pred", s(&input), "--gt", s(&input), "--out", s(&est), "--bin-width", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scene = configs().join("scene.json");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    assert!(pedem(&["simulate", "--config", s(&scene), "--seed", "9", "--out", s(&a)]).status.success());
    assert!(pedem(&["simulate", "--config", s(&scene), "--seed", "9", "--out", s(&b)]).status.success());
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn log_level_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("a.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_pedem"))
        .args(["simulate", "--config", s(&configs().join("scene.json")), "--seed", "1", "--out", s(&out_file)])
        .env("PEDEM_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("wrote 80 frames"));
    let out = Command::new(env!("CARGO_BIN_EXE_pedem"))
        .args(["simulate", "--config", s(&configs().join("scene.json")), "--seed", "1", "--out", s(&out_file)])
        .env("PEDEM_LOG", "error")
        .output()
        .unwrap();
    assert!(out.stderr.is_empty());
}
