use std::process::{Command, Output};

use serde_json::Value;

fn segdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segdyn"))
        .args(args)
        .output()
        .expect("run segdyn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// First data row of a CSV, keyed by header.
fn first_row(text: &str) -> Vec<(String, String)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned);
    let row = lines.next().unwrap().split(',').map(str::to_owned);
    header.zip(row).collect()
}

fn field(row: &[(String, String)], name: &str) -> f64 {
    row.iter()
        .find(|(k, _)| k == name)
        .unwrap()
        .1
        .parse()
        .unwrap()
}

#[test]
fn potential_on_the_perpendicular_bisector() {
    let out = segdyn(&["potential", "--at", "0,0,1", "--A", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let row = first_row(&stdout(&out));
    let expected = -(2f64.sqrt() + 1.0).ln() * 2.0;
    assert!((field(&row, "U") - expected).abs() < 1e-14);
    assert!(field(&row, "F_xi").abs() < 1e-14);
}

#[test]
fn potential_on_the_axis_beyond_the_end() {
    let out = segdyn(&["potential", "--at", "2,0,0", "--A", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let row = first_row(&stdout(&out));
    assert_eq!(field(&row, "d"), -2.0);
    assert!((field(&row, "U") + 3f64.ln()).abs() < 1e-14);
}

#[test]
fn potential_on_the_segment_is_a_usage_error() {
    let out = segdyn(&["potential", "--at", "0,0,0", "--A", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn slope_out_of_range_is_a_usage_error() {
    assert_eq!(
        segdyn(&["potential", "--at", "0,0,1", "--A", "0.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        segdyn(&["circular", "--s", "2.0", "--A", "0.1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(segdyn(&["circular", "--bogus"]).status.code(), Some(2));
}

#[test]
fn physical_potential_matches_scaled_model() {
    let phys = segdyn(&[
        "potential",
        "--physical",
        "--at",
        "0.3,0.8,0.2",
        "--G",
        "1",
        "--M",
        "2",
        "--L",
        "1",
        "--alpha",
        "0.75",
    ]);
    assert_eq!(phys.status.code(), Some(0));
    let row = first_row(&stdout(&phys));
    assert!(field(&row, "V") < 0.0);
    assert!(row.iter().any(|(k, _)| k == "F_z"));
}

#[test]
fn circular_orbit_by_family_parameter() {
    let out = segdyn(&["circular", "--s", "10", "--A", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let row = first_row(&stdout(&out));
    assert!((field(&row, "r") - 4.8926).abs() < 5e-4);
    assert!((field(&row, "x") + 0.5042).abs() < 5e-4);
    assert!((field(&row, "c") - 3.1023).abs() < 5e-4);
    assert!(field(&row, "res_F1") < 1e-12);
}

#[test]
fn circular_orbit_by_angular_momentum() {
    let out = segdyn(&["circular", "--c", "1", "--A", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let row = first_row(&stdout(&out));
    // s0 = (c^2 + sqrt(c^4 + 16)) / 2.
    let s0 = (1.0 + 17f64.sqrt()) / 2.0;
    assert!(
        (field(&row, "s") - s0).abs() < 1e-10,
        "{}",
        field(&row, "s")
    );
    assert_eq!(field(&row, "d"), 0.0);
}

#[test]
fn circular_sweep_prints_one_row_per_point() {
    let out = segdyn(&[
        "circular",
        "--sweep",
        "2.5:10:16",
        "--A",
        "0.2",
        "--jobs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 17);
}

#[test]
fn propagating_a_circular_orbit_closes() {
    let out = segdyn(&["propagate", "--circular-s", "10", "--A", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("termination: completed"), "{err}");
}

#[test]
fn propagate_checks_state_length() {
    let out = segdyn(&[
        "propagate",
        "--chart",
        "cartesian",
        "--state",
        "0,2,0",
        "--A",
        "0",
        "--t-end",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn axis_singularity_is_a_numerical_failure() {
    let out = segdyn(&[
        "propagate",
        "--chart",
        "reduced",
        "--state",
        "0,3,0.1,0",
        "--c",
        "1",
        "--A",
        "0",
        "--t-end",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn propagate_conserves_energy_in_output() {
    let out = segdyn(&[
        "propagate",
        "--chart",
        "cartesian",
        "--state",
        "0,2,0,0,0,0.8",
        "--A",
        "0",
        "--t-end",
        "10",
        "--stride",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let energies: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(energies.len(), 11);
    assert!(energies.iter().all(|e| (e - energies[0]).abs() < 1e-10));
}

#[test]
fn poincare_json_follows_schema() {
    let out = segdyn(&[
        "poincare",
        "--A",
        "0.125",
        "--c",
        "0.7",
        "--h",
        "-0.5",
        "--seeds",
        "1.1,0;1.2,-0.1",
        "--crossings",
        "5",
        "--jobs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let doc: Value = serde_json::from_str(&text).unwrap();
    let spec = &doc["spec"];
    for key in ["A", "c", "h", "units", "tols", "n_crossings", "max_time"] {
        assert!(spec.get(key).is_some(), "missing {key}");
    }
    assert!(text.find("\"spec\"").unwrap() < text.find("\"seeds\"").unwrap());
    let seeds = doc["seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 2);
    for s in seeds {
        assert_eq!(s["termination"], "completed");
        assert_eq!(s["crossings"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn fixpoint_near_tabulated_hyperbolic_point() {
    let out = segdyn(&[
        "fixpoint",
        "--A",
        "0.25",
        "--c",
        "0.7",
        "--reference",
        "1.68132,0,-0.46653,0.900399",
        "--guess",
        "1.68132,-0.46653",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = first_row(&text);
    assert!((field(&row, "r") - 1.68132).abs() < 1e-2);
    assert!(text.contains("hyperbolic"));
    assert!(field(&row, "residual") < 1e-9);
}

#[test]
fn fixpoint_without_return_is_a_numerical_failure() {
    let out = segdyn(&[
        "fixpoint",
        "--A",
        "0",
        "--c",
        "0.7",
        "--h",
        "-0.5",
        "--guess",
        "1.2,0",
        "--max-time",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reconstruct_writes_orbit_csv() {
    let out = segdyn(&[
        "reconstruct",
        "--A",
        "0",
        "--state",
        "1.5,0,0,0.2",
        "--c",
        "0.8",
        "--t-end",
        "1",
        "--stride",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("t,r,theta,x,xi,eta,zeta"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn output_file_gets_config_echo_and_config_is_reusable() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("orbit.csv");
    let out = segdyn(&[
        "circular",
        "--s",
        "10",
        "--A",
        "0.25",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let first = std::fs::read_to_string(&out_path).unwrap();
    let echo_path = dir.path().join("orbit.csv.config.json");
    let echo: Value = serde_json::from_str(&std::fs::read_to_string(&echo_path).unwrap()).unwrap();
    assert_eq!(echo["subcommand"], "circular");
    assert_eq!(echo["model"]["A"], 0.25);
    assert_eq!(echo["command"]["s"], 10.0);

    // Replaying the echoed config reproduces the run.
    let replay = segdyn(&["--config", echo_path.to_str().unwrap(), "circular"]);
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), first);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": {"A": 0.25}, "command": {"s": 10.0}}"#).unwrap();
    let from_file = first_row(&stdout(&segdyn(&[
        "--config",
        cfg.to_str().unwrap(),
        "circular",
    ])));
    assert_eq!(field(&from_file, "A"), 0.25);
    assert_eq!(field(&from_file, "s"), 10.0);
    let overridden = segdyn(&["--config", cfg.to_str().unwrap(), "circular", "--A", "0"]);
    assert_eq!(overridden.status.code(), Some(0));
    let row = first_row(&stdout(&overridden));
    assert_eq!(field(&row, "A"), 0.0);
    assert_eq!(field(&row, "s"), 10.0);
}

#[test]
fn config_for_another_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"subcommand": "poincare", "model": {"A": 0.25}}"#).unwrap();
    let out = segdyn(&["--config", cfg.to_str().unwrap(), "circular", "--s", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"A": 0.25, "B": 1}, "command": {"s": 10.0}}"#,
    )
    .unwrap();
    let out = segdyn(&["--config", cfg.to_str().unwrap(), "circular"]);
    assert_eq!(out.status.code(), Some(2));
}
