//! End-to-end checks of the command-line surface: flags, exit codes and
//! output formats.

use std::path::Path;
use std::process::{Command, Output};

fn sba_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sba-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn verify_small_space_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let output = sba_lab(&[
        "verify",
        "--n",
        "3",
        "--t",
        "2",
        "--exchange",
        "all",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = stdout_of(&output);
    assert!(stdout.contains("all checks passed"), "{stdout}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["all_passed"], serde_json::json!(true));
    assert_eq!(json["spaces"][0]["scenario_count"], serde_json::json!(3752));
    assert_eq!(json["spaces"][0]["exchanges"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_rejects_t_not_below_n() {
    let output = sba_lab(&["verify", "--n", "3", "--t", "3"]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("t < n"), "{stderr}");
}

#[test]
fn verify_respects_the_exhaustive_cap() {
    let output = sba_lab(&["verify", "--n", "8", "--t", "7"]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("above the cap"), "{stderr}");
    // The cap is adjustable through the environment.
    let output = Command::new(env!("CARGO_BIN_EXE_sba-lab"))
        .args(["verify", "--n", "3", "--t", "1", "--exchange", "flood"])
        .env("SBA_LAB_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn compare_csv_has_one_row_per_scenario_and_exchange() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cmp.csv");
    let output = sba_lab(&[
        "compare",
        "--n",
        "3",
        "--t",
        "1",
        "--mode",
        "exhaustive",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scenario_id,n,t,num_faulty,exchange,first_decision_round,decision_value,simultaneous,waste,fullinfo_ck_round"
    );
    assert_eq!(lines.len(), 1 + 296 * 5);
    // Exhaustive mode fills the oracle columns.
    assert!(!lines[1].ends_with(",,"), "{}", lines[1]);
    // FloodSet never beats any other exchange.
    let stdout = stdout_of(&output);
    let flood_row = stdout
        .lines()
        .find(|l| {
            let mut cells = l.split_whitespace();
            cells.next() == Some("flood") && cells.next().is_some_and(|c| c.parse::<u64>().is_ok())
        })
        .expect("matrix row");
    assert!(
        flood_row.split_whitespace().skip(1).all(|cell| cell == "0"),
        "{flood_row}"
    );
}

#[test]
fn sampled_compare_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let output = sba_lab(&[
            "compare",
            "--n",
            "5",
            "--t",
            "2",
            "--mode",
            "sampled",
            "--samples",
            "200",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "{output:?}");
    }
    assert_eq!(
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap()
    );
}

#[test]
fn trace_shows_the_partial_crash_example() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"n":3,"t":1,"init":[0,1,0],"crashes":[{"agent":2,"round":1,"delivered":[1]}]}"#,
    )
    .unwrap();
    let output = sba_lab(&[
        "trace",
        "--scenario",
        scenario.to_str().unwrap(),
        "--exchange",
        "flood",
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(json["times"][1]["states"]["1"]["W"], serde_json::json!([0, 1]));
    assert_eq!(json["times"][1]["states"]["3"]["W"], serde_json::json!([0]));
    assert_eq!(json["times"][1]["states"]["2"], serde_json::json!("crashed"));
}

#[test]
fn trace_rejects_unknown_agents_with_a_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"n":3,"t":1,"init":[0,1,0],"crashes":[{"agent":9,"round":1,"delivered":[]}]}"#,
    )
    .unwrap();
    let output = sba_lab(&[
        "trace",
        "--scenario",
        scenario.to_str().unwrap(),
        "--exchange",
        "flood",
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("crashes[0].agent"), "{stderr}");
}

#[test]
fn simulate_writes_csv_without_oracle_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let output = sba_lab(&[
        "simulate",
        "--n",
        "4",
        "--t",
        "3",
        "--mode",
        "sampled",
        "--samples",
        "50",
        "--seed",
        "3",
        "--exchange",
        "counting",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.lines().nth(1).unwrap().ends_with(",,"));
}

#[test]
fn unknown_flags_exit_with_usage_error() {
    let output = sba_lab(&["verify", "--frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(!Path::new("--frobnicate").exists());
}
