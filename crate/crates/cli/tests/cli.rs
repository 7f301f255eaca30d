use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use satnet_cli::commands::{COMPARE_HEADER, MONTHLY_HEADER, RATE_HEADER};
use satnet::netplan::PLAN_CSV_HEADER;

const FAST: &str = r#"
[sweep]
loss_start_db = 20.0
loss_stop_db = 40.0
loss_step_db = 10.0
channels_min = 1
channels_max = 2

[optimizer]
grid_points = 12
tolerance = 1e-3
"#;

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn satnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satnet")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn run(cmd: &str, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    satnet(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweeps_write_csv_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), FAST);
    let cases = [
        ("sweep-loss", RATE_HEADER, 3),
        ("sweep-channels", RATE_HEADER, 2),
        ("compare-detectors", COMPARE_HEADER, 3),
        ("optimize-chi", RATE_HEADER, 1),
        ("monthly-budget", MONTHLY_HEADER, 2),
        ("plan-network", PLAN_CSV_HEADER, 6),
    ];
    for (cmd, header, rows) in cases {
        let out = run(cmd, &cfg, &[]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = stdout(&out);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], header, "{cmd}");
        assert_eq!(lines.len(), rows + 1, "{cmd}");
        let width = header.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width), "{cmd}");
    }
}

#[test]
fn out_flag_writes_file_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), FAST);
    let target = dir.path().join("rates.csv");
    let out = run("sweep-loss", &cfg, &["--out", target.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&target).unwrap();
    assert!(csv.starts_with(RATE_HEADER));
    assert!(stdout(&out).contains("wrote"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), FAST);
    for cmd in ["sweep-loss", "compare-detectors", "plan-network"] {
        let a = run(cmd, &cfg, &["--jobs", "1"]);
        let b = run(cmd, &cfg, &["--jobs", "3"]);
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn mode_override_changes_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &format!("{FAST}\n[scenario]\nn_channels = 4\nloss_db = 20.0\n"));
    let tf = stdout(&run("optimize-chi", &cfg, &["--mode", "time-frequency"]));
    let os = stdout(&run("optimize-chi", &cfg, &["--mode", "one-sided"]));
    assert!(tf.contains(",time-frequency,"));
    assert!(os.contains(",one-sided,"));
    let skr = |s: &str| s.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse::<f64>().unwrap();
    assert!(skr(&os) < skr(&tf));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[link]\nsatelite_loss_db = 40.0\n");
    let out = run("sweep-loss", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("satelite_loss_db"));

    let cfg = config(dir.path(), "[detectors.ground]\nefficiency = 1.5\n");
    assert_eq!(run("optimize-chi", &cfg, &[]).status.code(), Some(2));

    let missing = dir.path().join("absent.toml");
    assert_eq!(run("validate", &missing, &[]).status.code(), Some(2));
}

#[test]
fn infeasible_plans_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[network]\ntopology = \"satellite\"\nchannels = 96\n");
    assert_eq!(run("plan-network", &cfg, &[]).status.code(), Some(3));

    let cfg = config(dir.path(), "[network]\nusers = 15\nchannels = 95\n");
    assert_eq!(run("plan-network", &cfg, &[]).status.code(), Some(3));
}

#[test]
fn validate_reports_without_running() {
    let dir = tempfile::tempdir().unwrap();
    let good = run("validate", &config(dir.path(), FAST), &[]);
    assert!(good.status.success());
    assert!(stdout(&good).trim_end().ends_with("valid"));

    let bad = run("validate", &config(dir.path(), "[monthly]\nusers = 15\n"), &[]);
    assert!(stdout(&bad).contains("invalid"));
}
