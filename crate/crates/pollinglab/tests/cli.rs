//! The binary and the command layer: outputs, manifests and exit codes.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use pollinglab::commands::{self, CheckOptions, RunOptions, SimulateOptions, SweepOptions};
use pollinglab::{Envelope, LoadedConfig, Sweep, SweepRange};
use pollinglab_core::delay::exhaustive_delay;
use pollinglab_core::{analyze, Analysis, Horizon, Scenario, SimEstimate, Strategy, Tolerances};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn station(lambda: f64, switchover: Value, timer: f64) -> Value {
    json!({
        "lambda": lambda,
        "service": {"kind": "exponential", "rate": 1.0},
        "switchover": switchover,
        "timer": timer,
    })
}

fn det(v: f64) -> Value {
    json!({"kind": "deterministic", "value": v})
}

fn config(stations: Vec<Value>, strategy: &str) -> String {
    serde_json::to_string_pretty(&json!({"stations": stations, "strategy": strategy})).unwrap()
}

fn two_station(strategy: &str, lambda: [f64; 2], switchover: Value, timers: [f64; 2]) -> String {
    config(
        vec![
            station(lambda[0], switchover.clone(), timers[0]),
            station(lambda[1], switchover, timers[1]),
        ],
        strategy,
    )
}

fn loaded(text: &str) -> LoadedConfig {
    LoadedConfig::parse(text.as_bytes().to_vec()).unwrap()
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cli(args: &[&str], stdin: Option<&str>, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pollinglab"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    match threads {
        Some(t) => cmd.env("POLLINGLAB_THREADS", t),
        None => cmd.env_remove("POLLINGLAB_THREADS"),
    };
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    // A child that fails before reading its input closes the pipe early.
    match pipe.write_all(stdin.unwrap_or("").as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        r => r.unwrap(),
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

#[test]
fn analyze_exhaustive_reports_the_exhaustive_delay() {
    let text = two_station("exhaustive", [0.3, 0.2], det(0.5), [0.0, 0.0]);
    let out = commands::analyze(&loaded(&text), None, &RunOptions::default()).unwrap();
    let model = loaded(&text).model().validate().unwrap();
    assert_eq!(out.result.report.d_bar, exhaustive_delay(&model));
}

#[test]
fn analyze_matches_the_library() {
    let text = two_station(
        "II",
        [0.3, 0.2],
        json!({"kind": "exponential", "rate": 2.0}),
        [1.0, 0.5],
    );
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, "ii.json", &text);
    let out = run_cli(&["analyze", path.to_str().unwrap()], None, None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let env: Envelope<Analysis> = serde_json::from_slice(&out.stdout).unwrap();
    let direct = analyze(
        &loaded(&text).model().validate().unwrap(),
        &Tolerances::default(),
    )
    .unwrap();
    assert_eq!(env.result, direct);
    assert_eq!(
        env.manifest.config_sha256,
        hex::encode(Sha256::digest(text.as_bytes()))
    );
    assert_eq!(env.manifest.command, "analyze");
    assert!(env.manifest.timestamps.is_none());
}

#[test]
fn analyze_is_byte_identical_across_runs_and_thread_counts() {
    let text = config(
        vec![
            station(
                0.2,
                json!({"kind": "mixture", "points": [[0.0, 0.5], [1.0, 0.5]]}),
                0.8,
            ),
            station(
                0.15,
                json!({"kind": "gamma", "shape": 2.0, "rate": 4.0}),
                0.4,
            ),
            station(0.1, det(0.3), 0.0),
        ],
        "III",
    );
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, "iii.json", &text);
    let p = path.to_str().unwrap();
    let a = run_cli(&["analyze", p], None, Some("1"));
    let b = run_cli(&["analyze", p], None, Some("3"));
    let c = run_cli(&["analyze", "-"], Some(&text), None);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);

    let out_path = dir.path().join("report.json");
    let d = run_cli(
        &["analyze", p, "--out", out_path.to_str().unwrap()],
        None,
        None,
    );
    assert!(d.status.success() && d.stdout.is_empty());
    assert_eq!(std::fs::read(out_path).unwrap(), a.stdout);
}

#[test]
fn simulate_is_reproducible_per_seed() {
    let text = two_station("III", [0.3, 0.2], det(0.5), [1.0, 0.5]);
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, "sim.json", &text);
    let p = path.to_str().unwrap();
    let a = run_cli(
        &["simulate", p, "--seed", "9", "--events", "200000"],
        None,
        None,
    );
    let b = run_cli(
        &["simulate", p, "--seed", "9", "--events", "200000"],
        None,
        None,
    );
    let c = run_cli(
        &["simulate", p, "--seed", "10", "--events", "200000"],
        None,
        None,
    );
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let env: Envelope<SimEstimate> = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(env.manifest.seeds, vec![9]);
    assert!(env.result.d_bar.half_width.is_finite());
}

#[test]
fn pooled_replications_cover_the_analytic_delay() {
    let text = two_station("IV", [0.3, 0.2], det(0.5), [1.0, 0.5]);
    let config = loaded(&text);
    let opts = SimulateOptions {
        seed: 3,
        horizon: Horizon::Events(1_000_000),
        replications: 3,
        ..Default::default()
    };
    let pooled = commands::simulate(&config, &opts, &RunOptions::default()).unwrap();
    assert_eq!(pooled.manifest.seeds, vec![3, 4, 5]);
    let exact = commands::analyze(&config, None, &RunOptions::default())
        .unwrap()
        .result
        .report
        .d_bar;
    let d = pooled.result.d_bar;
    assert!(
        (d.mean - exact).abs() <= 1.5 * d.half_width,
        "{} ± {} vs {exact}",
        d.mean,
        d.half_width
    );
}

#[test]
fn check_reports_verdicts() {
    let det_case = two_station("II", [0.3, 0.2], det(0.5), [0.0, 0.0]);
    let opts = CheckOptions {
        scenario: Some(Scenario::T2Zero),
        confirm: true,
        ..Default::default()
    };
    let out = commands::check(&loaded(&det_case), &opts, &RunOptions::default()).unwrap();
    assert_eq!(out.result.len(), 1);
    assert!(out.result[0].verdict.worth_waiting);
    assert_eq!(out.result[0].consistent, Some(true));

    let symmetric = two_station("exhaustive", [0.3, 0.3], det(0.5), [0.0, 0.0]);
    let opts = CheckOptions {
        scenario: Some(Scenario::SymmetricEqualTimers),
        ..Default::default()
    };
    let out = commands::check(&loaded(&symmetric), &opts, &RunOptions::default()).unwrap();
    let verdict = |s: Strategy| {
        out.result
            .iter()
            .find(|o| o.verdict.strategy == s)
            .unwrap()
            .verdict
            .worth_waiting
    };
    assert!(!verdict(Strategy::MinimumSojourn));
    assert!(!verdict(Strategy::EmptyArrivalTimer));
    assert!(out.result.iter().all(|o| o.optimum.is_none()));
}

#[test]
fn sweep_rows_are_ordered_and_round_trip() {
    let text = two_station("II", [0.3, 0.2], det(0.5), [0.0, 0.0]);
    let opts = SweepOptions {
        range: SweepRange::parse("0:2:5").unwrap(),
        strategies: vec![
            Strategy::IdleSojourn,
            Strategy::Exhaustive,
            Strategy::IdleCredit,
            Strategy::Exhaustive,
        ],
        seed: 4,
        events: 150_000,
    };
    let sweep = commands::sweep(&loaded(&text), &opts, &RunOptions::default()).unwrap();
    assert_eq!(sweep.rows.len(), 15);
    let order: Vec<Strategy> = sweep.rows[..3].iter().map(|r| r.strategy).collect();
    assert_eq!(
        order,
        [
            Strategy::Exhaustive,
            Strategy::IdleCredit,
            Strategy::IdleSojourn
        ]
    );
    let exhaustive: Vec<f64> = sweep
        .rows
        .iter()
        .filter(|r| r.strategy == Strategy::Exhaustive)
        .map(|r| r.dbar)
        .collect();
    assert!(exhaustive.iter().all(|&d| d == exhaustive[0]));
    for r in &sweep.rows {
        assert_eq!(r.ci_lo.is_some(), r.strategy == Strategy::IdleCredit);
    }
    assert_eq!(sweep.manifest.seeds, vec![4]);

    let csv = sweep.to_csv().unwrap();
    assert!(csv.lines().any(|l| l == "t1,strategy,dbar,ci_lo,ci_hi"));
    assert_eq!(Sweep::from_csv(csv.as_bytes()).unwrap(), sweep);
}

#[test]
fn sweep_cli_emits_csv() {
    let text = two_station("II", [0.3, 0.2], det(0.5), [0.0, 0.0]);
    let out = run_cli(
        &[
            "sweep",
            "-",
            "--range",
            "0:1:3",
            "--strategies",
            "exhaustive,II,IV",
        ],
        Some(&text),
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep = Sweep::from_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(sweep.rows.len(), 9);
    let bad = run_cli(&["sweep", "-", "--param", "t2"], Some(&text), None);
    assert_eq!(bad.status.code(), Some(2));
    let bad = run_cli(&["sweep", "-", "--range", "3:1:4"], Some(&text), None);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn trace_prints_one_line_per_event() {
    let text = two_station("IV", [0.3, 0.2], det(0.5), [1.0, 0.5]);
    let out = run_cli(&["trace", "-", "--events", "25"], Some(&text), None);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 26);
    assert!(lines[0].starts_with("# manifest {"));
    assert!(lines[1].contains("station 1") && lines[1].contains("server arrives"));
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let good = two_station("II", [0.3, 0.2], det(0.5), [1.0, 0.0]);
    let code = |args: &[&str], stdin: &str| run_cli(args, Some(stdin), None).status.code();

    assert_eq!(code(&["analyze", "-"], &good), Some(0));
    assert_eq!(code(&["analyze", "/definitely/not/here.json"], ""), Some(4));
    assert_eq!(code(&["analyze", "-"], "{not json"), Some(2));
    assert_eq!(
        code(
            &["analyze", "-"],
            &good.replace("\"lambda\": 0.3", "\"lambda\": 0.9")
        ),
        Some(2)
    );
    assert_eq!(
        code(
            &["analyze", "-"],
            &good.replace("\"strategy\"", "\"extra\": 1, \"strategy\"")
        ),
        Some(2)
    );
    assert_eq!(code(&["simulate", "-", "--warmup", "0.5"], &good), Some(2));

    let mut starved: Value = serde_json::from_str(&good).unwrap();
    starved["tolerances"] = json!({"truncation_start": 4, "truncation_cap": 4});
    assert_eq!(code(&["analyze", "-"], &starved.to_string()), Some(3));

    let out = run_cli(&["analyze", "-"], Some(&good), Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("POLLINGLAB_THREADS"));
}

#[test]
fn timestamps_are_opt_in() {
    let text = two_station("II", [0.3, 0.2], det(0.5), [1.0, 0.0]);
    let out = run_cli(&["analyze", "-", "--timestamps"], Some(&text), None);
    let env: Envelope<Analysis> = serde_json::from_slice(&out.stdout).unwrap();
    let t = env.manifest.timestamps.unwrap();
    assert!(t.started > 0.0 && t.finished >= t.started);
}
