use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_swipt-ee");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn defaults_round_trip_through_config_file() {
    let out = run(&["defaults"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", std::str::from_utf8(&out.stdout).unwrap());
    let again = run(&["defaults"]);
    assert_eq!(out.stdout, again.stdout);
    let solve = run(&["solve", "--config", &cfg, "--seed", "4"]);
    assert_eq!(solve.status.code(), Some(0));
}

#[test]
fn shipped_config_matches_defaults() {
    let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/paper_defaults.json");
    let text = std::fs::read_to_string(shipped).unwrap();
    let out = run(&["defaults"]);
    assert_eq!(text.as_bytes(), &out.stdout[..]);
}

#[test]
fn solve_prints_json_and_is_repeatable() {
    let a = run(&["solve", "--seed", "11"]);
    let b = run(&["solve", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 11);
    assert_eq!(v["scheme"], "proposed");
    assert_eq!(v["result"]["feasible"], true);
    assert!(v["energy_efficiency_bit_per_joule"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["alloc"]["p_w"].as_array().unwrap().len(), 128);
}

#[test]
fn infeasible_solve_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"p_max_dbm": -20, "rho_grid_m": 10}"#);
    let out = run(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["feasible"], false);
}

#[test]
fn bad_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"n_trails": 3}"#);
    let out = run(&["sweep", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_trails"));

    let invalid = write(dir.path(), "i.json", r#"{"n_trials": 0}"#);
    assert_eq!(run(&["sweep", "--config", &invalid]).status.code(), Some(1));

    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["sweep", "--config", missing.to_str().unwrap()]).status.code(), Some(1));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn bad_thread_count_exits_one() {
    let out = Command::new(BIN)
        .args(["defaults"])
        .env("SWIPT_EE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_csv_and_svg_are_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"n_trials": 6, "p_max_dbm_grid": [6, 22], "inr_db_list": [0, 50], "rho_grid_m": 20}"#,
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let csv = dir.path().join(format!("s{threads}.csv"));
        let svg = dir.path().join(format!("s{threads}.svg"));
        let status = Command::new(BIN)
            .args(["sweep", "--config", &cfg, "--output", csv.to_str().unwrap()])
            .env("SWIPT_EE_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        let plot = run(&[
            "plot",
            "--input",
            csv.to_str().unwrap(),
            "--output",
            svg.to_str().unwrap(),
            "--metric",
            "rho",
        ]);
        assert!(plot.status.success());
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&svg).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    assert!(csv.starts_with(swipt_ee::cli::output::CSV_HEADER));
    assert!(String::from_utf8_lossy(&outputs[0].1).starts_with("<svg"));
}

#[test]
fn convergence_csv_has_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"convergence_trials": 4, "convergence_p_max_dbm": [22], "convergence_inr_db": [10], "l_max": 7, "rho_grid_m": 20}"#,
    );
    let out = run(&["convergence", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "inr_db,p_max_dbm,iteration,avg_ee_bit_per_joule");
    assert_eq!(lines.len(), 8);
    let ee: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(ee.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn verify_passes_on_a_short_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.json", r#"{"verify_instances": 6}"#);
    let out = run(&["verify", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn plot_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "not,a,sweep\n1,2,3\n");
    let svg = dir.path().join("o.svg");
    let out = run(&["plot", "--input", &bad, "--output", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!svg.exists());
}
