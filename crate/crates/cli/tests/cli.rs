use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dyngame_cli::config::ExperimentConfig;
use dyngame_cli::report::RunReport;
use serde_json::{json, Value};
use tempfile::TempDir;

fn run(dir: &Path, config: &Value, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dyngame"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out-dir")
        .arg(dir)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> RunReport {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn cournot(n: usize, a: f64, c: f64, k: f64) -> Value {
    json!({"cournot": {"n": n, "a": a, "b": 1.0, "c": vec![c; n], "K": vec![k; n], "Q": vec![5.0; n]}})
}

fn duopoly() -> Value {
    json!({
        "game": cournot(2, 10.0, 1.0, 0.0),
        "sim": {"h": 0.25, "r": 1.0, "T": 2.0, "horizon": 200.0, "seed": 3},
        "uncertainty": {"Theta": 0.5, "theta_kind": "seeded", "tau_kind": "seeded", "d_kind": "adversarial_sign"},
        "monitor": {"sigma": "auto", "mu": "auto"},
        "initial": {"constant": [0.4, -0.6]}
    })
}

fn counterexample() -> Value {
    json!({
        "game": cournot(2, 10.0, 8.0, -1.5),
        "nash": {"start": [0.0, 0.0]},
        "sim": {"h": 0.25, "r": 1.0, "T": 2.0, "horizon": 50.0, "seed": 0},
        "uncertainty": {"Theta": 0.0, "theta_kind": "zero", "tau_kind": "min", "d_kind": "initial_sign"},
        "initial": {"profile": [0.0, 4.0]}
    })
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    // R_i = 1/(2 + 4/3) = 0.3
    let out = run(
        dir.path(),
        &json!({"game": cournot(3, 20.0, 1.0, 4.0 / 3.0)}),
        &["check"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(dir.path());
    assert_eq!(r.small_gain[0].conditions.len(), 4);
    assert_eq!(r.conditions_pass, Some(true));

    let out = run(
        dir.path(),
        &json!({"game": cournot(4, 20.0, 1.0, 4.0)}),
        &["check"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(dir.path()).small_gain[0].conditions.len(), 11);

    let out = run(
        dir.path(),
        &json!({"game": cournot(2, 10.0, 8.0, -1.5)}),
        &["check"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(dir.path()).conditions_pass, Some(false));
}

#[test]
fn weighted_family_rescues_three_players() {
    let dir = TempDir::new().unwrap();
    // R = (0.7, 0.7, 0.1) through K = b/R - 2b
    let game = json!({"cournot": {"n": 3, "a": 20.0, "b": 1.0, "c": [1.0, 1.0, 1.0],
        "K": [1.0 / 0.7 - 2.0, 1.0 / 0.7 - 2.0, 8.0], "Q": [5.0, 5.0, 5.0]}});
    let out = run(dir.path(), &json!({"game": game}), &["check"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r.small_gain.len(), 2);
    assert!(!r.small_gain[0].passed() && r.small_gain[1].passed());
}

#[test]
fn errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"game\": {\"cournot\": \n  {\"n\": 2,,}}}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dyngame"))
        .args(["check", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2"), "{msg}");

    let out = Command::new(env!("CARGO_BIN_EXE_dyngame"))
        .arg("check")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_dyngame"))
        .arg("bogus")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let mut config = duopoly();
    config["uncertainty"]["Theta"] = json!(1.5);
    assert_eq!(
        run(dir.path(), &config, &["simulate"]).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_writes_csv_and_report() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &duopoly(), &["simulate"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(
        rows.len() - 1,
        (200.0 / 0.25) as usize + (2.0 / 0.25) as usize + 1
    );
    assert!(rows[0].iter().any(|h| h == "V_2"));
    let r = report(dir.path());
    let verdict = r.verdict.as_ref().unwrap();
    assert!(verdict.converged && verdict.violations.is_empty());
    assert_eq!(r.monitor.as_ref().unwrap().violation_count, 0);
    assert!(r
        .nash
        .as_ref()
        .unwrap()
        .q_star
        .iter()
        .all(|q| (q - 3.0).abs() < 1e-12));

    // round trip and hash
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.config.hash(), back.config_hash);
    let reparsed =
        ExperimentConfig::from_json(&serde_json::to_string(&back.config).unwrap()).unwrap();
    assert_eq!(reparsed.hash(), r.config_hash);
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l[3..].split('"').next().unwrap())
        .collect();
    assert_eq!(
        &keys[..5],
        ["tool", "version", "command", "config_hash", "config"]
    );
}

#[test]
fn identical_configs_give_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut config = duopoly();
    config["uncertainty"]["d_kind"] = json!("seeded");
    for dir in [&a, &b] {
        assert_eq!(
            run(dir.path(), &config, &["simulate"]).status.code(),
            Some(0)
        );
    }
    for file in ["trajectory.csv", "report.json"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap()
        );
    }
    let c = TempDir::new().unwrap();
    assert_eq!(
        run(c.path(), &config, &["simulate", "--seed", "99"])
            .status
            .code(),
        Some(0)
    );
    assert_ne!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(c.path().join("trajectory.csv")).unwrap()
    );
    assert_eq!(report(c.path()).config.sim.seed, 99);
}

#[test]
fn zero_history_stays_at_equilibrium() {
    let dir = TempDir::new().unwrap();
    let mut config = duopoly();
    config["initial"] = json!("zero");
    assert_eq!(
        run(dir.path(), &config, &["simulate"]).status.code(),
        Some(0)
    );
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    let x: Vec<usize> = (0..rows[0].len())
        .filter(|&k| rows[0][k].starts_with("x_"))
        .collect();
    assert_eq!(x.len(), 2);
    for row in &rows[1..] {
        assert!(x.iter().all(|&k| row[k].parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn counterexample_config_does_not_converge() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &counterexample(), &["simulate"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(dir.path());
    assert_eq!(r.conditions_pass, Some(false));
    assert!(!r.verdict.unwrap().converged);
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    let x: Vec<usize> = (0..rows[0].len())
        .filter(|&k| rows[0][k].starts_with("x_"))
        .collect();
    for &k in &x {
        let first: f64 = rows[1][k].parse().unwrap();
        assert!(rows[1..]
            .iter()
            .all(|row| (row[k].parse::<f64>().unwrap() - first).abs() <= 1e-12));
    }
}

#[test]
fn nash_and_fixed_points() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        run(dir.path(), &counterexample(), &["nash"]).status.code(),
        Some(0)
    );
    let q = report(dir.path()).nash.unwrap().q_star;
    assert!(q.iter().all(|v| (v - 4.0 / 3.0).abs() < 1e-9));
    assert_eq!(
        run(dir.path(), &counterexample(), &["fixed-points"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(report(dir.path()).fixed_points.unwrap().len(), 3);
}

#[test]
fn sweep_maps_the_two_player_boundary() {
    let dir = TempDir::new().unwrap();
    let mut config = duopoly();
    config["sim"]["horizon"] = json!(20.0);
    config["sweep"] = json!({"axes": [
        {"path": "/game/cournot/K/0", "values": {"start": -1.2, "stop": 1.0, "count": 10}},
        {"path": "/game/cournot/K/1", "values": {"start": -1.2, "stop": 1.0, "count": 10}}
    ]});
    let out = run(dir.path(), &config, &["sweep"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0][2], "small_gain");
    let mut previous = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for row in &rows[1..] {
        let (k1, k2): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((k1, k2) > previous);
        previous = (k1, k2);
        let product = 1.0 / ((2.0 + k1) * (2.0 + k2));
        assert_eq!(
            row[2],
            if product < 1.0 { "pass" } else { "fail" },
            "K = ({k1}, {k2})"
        );
    }
    let again = TempDir::new().unwrap();
    run(again.path(), &config, &["sweep"]);
    assert_eq!(
        fs::read(dir.path().join("sweep.csv")).unwrap(),
        fs::read(again.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn sweep_flags_the_counterexample_cell() {
    let dir = TempDir::new().unwrap();
    let mut config = counterexample();
    config["uncertainty"] =
        json!({"Theta": 0.5, "theta_kind": "seeded", "tau_kind": "seeded", "d_kind": "seeded"});
    config["initial"] = json!({"constant": [0.1, -0.1]});
    config["sweep"] = json!({"axes": [{"path": "/game/cournot/K/0", "values": [-1.5, 1.0]}]});
    assert_eq!(run(dir.path(), &config, &["sweep"]).status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(
        (rows[1][1].as_str(), rows[1][3].as_str()),
        ("fail", "false")
    );
}

#[test]
fn sweep_edge_cases() {
    let dir = TempDir::new().unwrap();
    let mut config = duopoly();
    config["sweep"] = json!({"axes": [{"path": "/game/cournot/a", "values": []}]});
    assert_eq!(run(dir.path(), &config, &["sweep"]).status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(dir.path().join("sweep.csv")).unwrap(),
        "/game/cournot/a,small_gain,worst_margin,converged,convergence_time\n"
    );

    config["sweep"] =
        json!({"axes": [{"path": "/game/cournot/a", "values": [1.0, 2.0, 3.0]}], "budget": 2});
    assert_eq!(run(dir.path(), &config, &["sweep"]).status.code(), Some(1));
    config["sweep"] = json!({"axes": [{"path": "/game/nope", "values": [1.0]}]});
    assert_eq!(run(dir.path(), &config, &["sweep"]).status.code(), Some(1));
}
