//! End-to-end checks of the command-line driver: exit codes, output files,
//! byte-for-byte determinism, and round-trips through the documented parsers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn torbil() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torbil"))
}

fn repo_scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("torbil-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    torbil().args(args).output().expect("binary runs")
}

#[test]
fn validate_passes_on_s2() {
    let out = tmp_dir("validate-ok");
    let output = run(&[
        "--scene",
        repo_scene("s2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "validate",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = fs::read_to_string(out.join("validate.json")).unwrap();
    assert!(report.contains("\"passed\": true"));
    assert!(!report.contains("\"passed\": false"));
}

#[test]
fn validate_fails_on_overlapping_projections_and_names_the_axis() {
    let out = tmp_dir("validate-bad");
    let output = run(&[
        "--scene",
        repo_scene("overlapping_projections.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "validate",
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("FAIL projection_disjoint[axis 1][1,2]"));
}

#[test]
fn unknown_scene_file_is_a_usage_error() {
    let output = run(&["--scene", "/nonexistent/scene.json", "validate"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("error"));
}

#[test]
fn rotset_outputs_are_deterministic_and_parse_back() {
    let out1 = tmp_dir("rotset-1");
    let out2 = tmp_dir("rotset-2");
    for out in [&out1, &out2] {
        let output = run(&[
            "--scene",
            repo_scene("s2.json").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--qmax",
            "2",
            "--seed",
            "7",
            "rotset",
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    for name in ["rotset.json", "cloud.csv", "hull.csv"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // Cloud rows parse back and contain the zero sample.
    let cloud = fs::read_to_string(out1.join("cloud.csv")).unwrap();
    let rows = torbil_core::io::cloud_table_rows(&cloud, 2).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().any(|(v, _)| v.iter().all(|x| x.abs() < 1e-12)));
}

#[test]
fn trajectory_minimizes_given_type_between_anchors() {
    let out = tmp_dir("trajectory");
    let seq_path = out.join("seq.json");
    fs::write(&seq_path, "[[0,0,1]]").unwrap();
    let output = run(&[
        "--scene",
        repo_scene("s1.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "trajectory",
        "--seq",
        seq_path.to_str().unwrap(),
        "--start",
        "0.3,0.7",
        "--end",
        "0.7,0.7",
    ]);
    assert!(output.status.success(), "{output:?}");
    let piece =
        torbil_core::io::piece_from_json(&fs::read_to_string(out.join("piece.json")).unwrap())
            .unwrap();
    assert!((piece.length - 0.447_213_595_499_958).abs() < 1e-9);
    assert!((piece.points[0][0] - 0.5).abs() < 1e-9);
    assert!((piece.points[0][1] - 0.6).abs() < 1e-9);
}

#[test]
fn trajectory_rejects_inadmissible_type() {
    let out = tmp_dir("trajectory-bad");
    let seq_path = out.join("seq.json");
    fs::write(&seq_path, "[[0,0,1],[1,0,1],[2,0,1]]").unwrap();
    let output = run(&[
        "--scene",
        repo_scene("s1.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "trajectory",
        "--seq",
        seq_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("not admissible"));
}

#[test]
fn flow_event_table_round_trips() {
    let out = tmp_dir("flow");
    let output = run(&[
        "--scene",
        repo_scene("s2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--nmax",
        "25",
        "flow",
        "--start",
        "0.5,0.1",
        "--dir",
        "0.3,1.0",
    ]);
    assert!(output.status.success(), "{output:?}");
    let table = fs::read_to_string(out.join("flight.csv")).unwrap();
    let rows = torbil_core::io::flight_table_rows(&table, 2).unwrap();
    assert_eq!(rows.len(), 25);
    let series = fs::read_to_string(out.join("rotation_series.csv")).unwrap();
    assert_eq!(series.lines().filter(|l| !l.starts_with('#')).count(), 25);
}

#[test]
fn graph_command_reports_and_exports() {
    let out = tmp_dir("graph");
    let output = run(&[
        "--scene",
        repo_scene("s2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jmax",
        "2",
        "graph",
    ]);
    assert!(output.status.success(), "{output:?}");
    let doc = torbil_core::io::increment_graph_doc_from_json(
        &fs::read_to_string(out.join("increment_graph.json")).unwrap(),
    )
    .unwrap();
    assert!(!doc.vertices.is_empty());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("self-edges 0"));
    assert!(stdout.contains("symmetry violations"));
}

#[test]
fn inclusion_certificate_passes_on_s1() {
    let out = tmp_dir("inclusion");
    let output = run(&[
        "--scene",
        repo_scene("s1.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--qmax",
        "4",
        "--k",
        "100",
        "inclusion",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = fs::read_to_string(out.join("inclusion.json")).unwrap();
    assert!(report.contains("\"pass\": true"));
}

#[test]
fn escape_reports_bounded_verdict_for_s1() {
    let out = tmp_dir("escape");
    let output = run(&[
        "--scene",
        repo_scene("s1.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "escape",
        "--label",
        "1",
        "--resolution",
        "360",
    ]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("bounded"), "{stdout}");
}

#[test]
fn periodic_exports_orbits_that_parse_back() {
    let out = tmp_dir("periodic");
    let output = run(&[
        "--scene",
        repo_scene("s2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--qmax",
        "3",
        "periodic",
    ]);
    assert!(output.status.success(), "{output:?}");
    let orbits: Vec<torbil_core::varpath::PeriodicOrbit> =
        serde_json::from_str(&fs::read_to_string(out.join("orbits.json")).unwrap()).unwrap();
    assert!(!orbits.is_empty());
    for orbit in &orbits {
        assert!(orbit.residual < 1e-10);
        assert!(orbit.period_length > 0.0);
    }
    let table = fs::read_to_string(out.join("orbits.csv")).unwrap();
    assert_eq!(
        table.lines().filter(|l| !l.starts_with('#')).count(),
        orbits.len()
    );
}

#[test]
fn convexity_command_passes_on_s2() {
    let out = tmp_dir("convexity");
    let output = run(&[
        "--scene",
        repo_scene("s2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--eps",
        "0.25",
        "--t",
        "0.5",
        "convexity",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = fs::read_to_string(out.join("convexity.json")).unwrap();
    assert!(report.contains("\"pass\": true"));
}

#[test]
fn trajectory_rejects_out_of_range_labels() {
    let out = tmp_dir("trajectory-label");
    let seq_path = out.join("seq.json");
    fs::write(&seq_path, "[[0,0,1],[0,0,3]]").unwrap();
    let output = run(&[
        "--scene",
        repo_scene("s2.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "trajectory",
        "--seq",
        seq_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("exceeds the scene's 2 obstacles"), "{stderr}");
}
