//! End-to-end tests of the `agrofin` binary: exit codes, config validation,
//! and golden-output regression.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn agrofin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agrofin"))
}

fn run(args: &[&str]) -> Output {
    agrofin().args(args).output().expect("binary runs")
}

fn out_dir() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap().to_string();
    (dir, path)
}

#[test]
fn solve_defaults_succeeds_with_thirty_percent_defaults() {
    let (_guard, dir) = out_dir();
    let output = run(&["solve", "--out", &dir]);
    assert!(output.status.success(), "{output:?}");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&dir).join("summary.json")).unwrap())
            .unwrap();
    let f = summary["metrics"]["default_frac"].as_f64().unwrap();
    assert!((f - 0.30).abs() <= 0.05, "default_frac {f}");

    let schedule = std::fs::read_to_string(Path::new(&dir).join("price_schedule.csv")).unwrap();
    assert_eq!(schedule.lines().count(), 134); // header + 133 nodes
    assert!(!schedule.contains('\r'));
}

#[test]
fn missing_required_key_exits_2_and_names_it() {
    let (_guard, dir) = out_dir();
    let config = Path::new(&dir).join("bad.toml");
    std::fs::write(
        &config,
        "[scenario]\nw=0.02\nsigma_bar=0.1\nsigma=0.2\ntheta0=0.5\nc_f=0.6\nc_s=0.0002\n",
    )
    .unwrap();
    let output = run(&["solve", "--config", config.to_str().unwrap(), "--out", &dir]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("beta"), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_exits_2() {
    let (_guard, dir) = out_dir();
    let config = Path::new(&dir).join("typo.toml");
    std::fs::write(&config, "[solver]\ngamma_tolerance = 1e-7\n").unwrap();
    let output = run(&["solve", "--config", config.to_str().unwrap(), "--out", &dir]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("gamma_tolerance"), "stderr: {stderr}");
}

#[test]
fn infeasible_scenario_exits_3() {
    let (_guard, dir) = out_dir();
    let output = run(&["solve", "--alpha", "0.4", "--out", &dir]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn unreachable_calibration_exits_4() {
    let (_guard, dir) = out_dir();
    let output = run(&["calibrate-market-b", "--out", &dir]);
    assert_eq!(output.status.code(), Some(4), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("floor"), "stderr: {stderr}");
}

#[test]
fn reachable_calibration_succeeds() {
    let (_guard, dir) = out_dir();
    let output = run(&["calibrate-market-b", "--target", "0.13", "--out", &dir]);
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&dir).join("market_b.json")).unwrap())
            .unwrap();
    let achieved = report["achieved_default_frac"].as_f64().unwrap();
    assert!((achieved - 0.13).abs() <= 0.005, "achieved {achieved}");
    assert!(report["market_b"]["w"].as_f64().unwrap() > 0.02);
}

#[test]
fn degenerate_aggregate_volatility_reports_single_node_schedule() {
    let (_guard, dir) = out_dir();
    let config = Path::new(&dir).join("point.toml");
    std::fs::write(
        &config,
        "[scenario]\nbeta=0.6\nw=0.02\nsigma_bar=0.0\nsigma=0.2\ntheta0=0.5\nc_f=0.6\nc_s=0.0002\n",
    )
    .unwrap();
    let output = run(&["solve", "--config", config.to_str().unwrap(), "--out", &dir]);
    assert!(output.status.success(), "{output:?}");
    let schedule = std::fs::read_to_string(Path::new(&dir).join("price_schedule.csv")).unwrap();
    assert_eq!(schedule.lines().count(), 2); // header + the single θ₀ node
}

#[test]
fn sweep_with_explicit_values_writes_table() {
    let (_guard, dir) = out_dir();
    let config = Path::new(&dir).join("sweep.toml");
    std::fs::write(&config, "[sweep]\nvalues = [0.0, 0.05]\n").unwrap();
    let output = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--mode",
        "both",
        "--out",
        &dir,
    ]);
    assert!(output.status.success(), "{output:?}");
    let csv = std::fs::read_to_string(Path::new(&dir).join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("alpha,rational_feasible,rational_gamma"));
}

#[test]
fn validate_fails_only_on_the_documented_invariant() {
    let (_guard, dir) = out_dir();
    let output = run(&["validate", "--out", &dir]);
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(&dir).join("validate_report.json")).unwrap(),
    )
    .unwrap();
    let failing: Vec<&str> = report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| !e["pass"].as_bool().unwrap())
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, vec!["smoothing_ratio_alpha_0_4"]);
}

// --- golden outputs -------------------------------------------------------

fn goldens_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/goldens/solve")
}

/// Byte-identical on the generating platform; numerically within 1e-9
/// relative everywhere else.
fn assert_matches_golden(fresh: &Path, golden: &Path) {
    let fresh_text = std::fs::read_to_string(fresh).unwrap();
    let golden_text = std::fs::read_to_string(golden).unwrap();
    if fresh_text == golden_text {
        return;
    }
    // tolerate cross-platform last-ulp drift, cell by cell
    let name = fresh.file_name().unwrap().to_string_lossy();
    for (line_no, (a, b)) in fresh_text.lines().zip(golden_text.lines()).enumerate() {
        if a == b {
            continue;
        }
        for (cell_a, cell_b) in a.split(',').zip(b.split(',')) {
            if cell_a == cell_b {
                continue;
            }
            // also handles pretty-JSON lines of the form `"key": value`
            let number = |cell: &str| -> Option<f64> {
                cell.rsplit(':').next().unwrap_or(cell).trim().parse().ok()
            };
            let (va, vb): (f64, f64) = match (number(cell_a), number(cell_b)) {
                (Some(va), Some(vb)) => (va, vb),
                _ => panic!("{name}:{line_no}: non-numeric mismatch {cell_a:?} vs {cell_b:?}"),
            };
            let scale = vb.abs().max(1e-300);
            assert!(
                (va - vb).abs() / scale <= 1e-9,
                "{name}:{line_no}: {va} vs golden {vb}"
            );
        }
    }
    assert_eq!(
        fresh_text.lines().count(),
        golden_text.lines().count(),
        "{name}: line count mismatch"
    );
}

#[test]
fn solve_outputs_match_committed_goldens() {
    let (_guard, dir) = out_dir();
    let output = run(&["solve", "--out", &dir]);
    assert!(output.status.success(), "{output:?}");
    for name in ["summary.json", "price_schedule.csv", "metrics.csv"] {
        assert_matches_golden(&Path::new(&dir).join(name), &goldens_dir().join(name));
    }
}
