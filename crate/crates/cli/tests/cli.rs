use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use sarplan_cli::{cli_main, EXIT_COLLAPSE, EXIT_CONFIG, EXIT_OK, OUT_ENV};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sarplan").chain(args.iter().copied());
    let code = cli_main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_config_error() {
    let (code, _, err) = call(&["run", "--no-such-flag"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("--no-such-flag"));
}

#[test]
fn bad_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(
        call(&["run", "--scenario", "nowhere.toml", "--out", out]).0,
        EXIT_CONFIG
    );
    assert_eq!(call(&["batch", "--runs", "0", "--out", out]).0, EXIT_CONFIG);
    assert_eq!(call(&["run", "--mode", "sideways", "--out", out]).0, EXIT_CONFIG);
    assert_eq!(call(&["footprint", "--z", "-3"]).0, EXIT_CONFIG);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[model]\ngamma = 2.0\n").unwrap();
    assert_eq!(call(&["run", "--scenario", path(&bad), "--out", out]).0, EXIT_CONFIG);
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in ["run", "batch", "compare", "heatmap", "footprint"] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn footprint_reports_the_nadir_rectangle() {
    let (code, out, _) = call(&["footprint", "--x", "10", "--y", "5", "--z", "16"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("5.1745 m along x, 7.0128 m along y"), "{out}");
    assert!(out.contains("12.5872 8.5064"), "{out}");
}

#[test]
fn batch_prints_a_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (code, text, err) = call(&[
        "batch",
        "--runs",
        "5",
        "--mode",
        "mission",
        "--scenario",
        "l1",
        "--out",
        out,
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(text.contains("TP%") && text.contains("mission"), "{text}");
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 6);
    assert!(dir.path().join("coordinates.csv").exists());
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["runs"], 5);
}

#[test]
fn run_twice_gives_identical_files() {
    let files = [
        "trajectory.csv",
        "solver_trace.csv",
        "record.jsonl",
        "runs.csv",
        "coordinates.csv",
        "metrics.json",
    ];
    for mode in ["mission", "offboard", "hybrid"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let (code, _, err) = call(&[
                "run",
                "--seed",
                "7",
                "--mode",
                mode,
                "--scenario",
                "l2",
                "--out",
                path(d.path()),
            ]);
            assert_eq!(code, EXIT_OK, "{err}");
        }
        for f in files {
            let x = fs::read(a.path().join(f)).unwrap();
            let y = fs::read(b.path().join(f)).unwrap();
            assert!(!x.is_empty(), "{mode}/{f} is empty");
            assert_eq!(x, y, "{mode}/{f} differs");
        }
    }
}

#[test]
fn compare_and_heatmap_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (code, text, err) = call(&["compare", "--runs", "2", "--scenario", "l1", "--out", out]);
    assert_eq!(code, EXIT_OK, "{err}");
    for mode in ["mission", "offboard", "hybrid"] {
        assert!(text.contains(mode));
    }
    assert_eq!(
        fs::read_to_string(dir.path().join("compare.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    let (code, _, err) = call(&["heatmap", "--runs", "3", "--cell", "1", "--out", out]);
    assert_eq!(code, EXIT_OK, "{err}");
    let pgm = fs::read_to_string(dir.path().join("heatmap.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n"));
    assert!(dir.path().join("heatmap.csv").exists());
}

/// A survey small enough to sit inside one footprint, with a detector that
/// never misses: the first empty look rules out every hypothesis.
const COLLAPSING: &str = r#"
name = "collapse"
distractors = []

[model]
survey = { min_x = 0.0, min_y = 0.0, max_x = 4.0, max_y = 4.0 }
start = { x = 2.0, y = 2.0, z = 16.0 }

[model.detector]
misses = false
spurious_rate = 0.0

[mission]
max_belief_resets = 0
collapse_is_error = true

[wind]
rate = 0.0
"#;

#[test]
fn belief_collapse_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("collapse.toml");
    fs::write(&file, COLLAPSING).unwrap();
    let (code, _, err) = call(&[
        "run",
        "--mode",
        "offboard",
        "--scenario",
        path(&file),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code, EXIT_COLLAPSE, "{err}");
    assert!(err.contains("belief collapsed"), "{err}");
}

#[test]
fn binary_uses_the_output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_sarplan"))
        .args(["run", "--seed", "3", "--scenario", "empty"])
        .env(OUT_ENV, dir.path())
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    assert!(dir.path().join("trajectory.csv").exists());
    let status = Command::new(env!("CARGO_BIN_EXE_sarplan"))
        .arg("--bogus")
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}
