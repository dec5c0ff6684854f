//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

const SMOKE_CONFIG: &str = "\
# small, fast smoke scenario
engine = adara
seed = 1
node_count = 10
duration = 2.0
flows = 2
";

static NEXT_DIR: AtomicU32 = AtomicU32::new(0);

/// Fresh scratch directory per test.
fn scratch() -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "manet-cli-test-{}-{}",
        std::process::id(),
        NEXT_DIR.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn manet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn run_prints_header_and_row() {
    let dir = scratch();
    let config = dir.join("smoke.conf");
    fs::write(&config, SMOKE_CONFIG).unwrap();

    let out = manet(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "engine,seed,node_count,v_max,pause,flows,pdr,avg_delay_s,rreq,rrep,rerr,hello,total_signaling,bytes"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("adara,1,10,"), "row: {row}");
    assert!(lines.next().is_none(), "exactly one row expected");
}

#[test]
fn run_applies_overrides_and_writes_artifacts() {
    let dir = scratch();
    let config = dir.join("smoke.conf");
    fs::write(&config, SMOKE_CONFIG).unwrap();
    let csv = dir.join("runs.csv");
    let trace = dir.join("run.trace");

    for seed in ["3", "4"] {
        let out = manet(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--engine",
            "aodv",
            "--seed",
            seed,
            "--csv",
            csv.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        assert!(stdout_of(&out).is_empty(), "rows go to the csv file");
    }

    let rows: Vec<String> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(rows.len(), 3, "one header plus two appended rows");
    assert!(rows[0].starts_with("engine,seed,"));
    assert!(rows[1].starts_with("aodv,3,10,"));
    assert!(rows[2].starts_with("aodv,4,10,"));

    // The trace artifact is re-verifiable offline.
    let check = manet(&["check", "--trace", trace.to_str().unwrap()]);
    assert!(check.status.success(), "stderr: {}", stderr_of(&check));
    assert!(stdout_of(&check).starts_with("ok:"));
}

#[test]
fn sweep_crosses_axes_and_seeds() {
    let dir = scratch();
    let config = dir.join("smoke.conf");
    fs::write(&config, SMOKE_CONFIG).unwrap();

    let out = manet(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--param",
        "engine=adara,aodv",
        "--param",
        "v_max=0,10",
        "--seeds",
        "2",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 9, "header plus 2×2×2 rows: {stdout}");
    assert!(lines[0].starts_with("engine,seed,"));
    // First axis outermost, seeds innermost.
    assert!(lines[1].starts_with("adara,1,"));
    assert!(lines[2].starts_with("adara,2,"));
    assert!(lines[5].starts_with("aodv,1,"));
    // The v_max axis shows up in the rows.
    assert!(lines[1].contains(",0,"), "v_max column: {}", lines[1]);
    assert!(lines[3].contains(",10,"), "v_max column: {}", lines[3]);
}

#[test]
fn check_flags_a_tampered_trace() {
    let dir = scratch();
    let config = dir.join("smoke.conf");
    fs::write(&config, SMOKE_CONFIG).unwrap();
    let trace = dir.join("run.trace");

    let out = manet(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    // Duplicate the last delivery line: the same packet cannot arrive
    // twice.
    let text = fs::read_to_string(&trace).unwrap();
    let delivered: Vec<&str> = text
        .lines()
        .filter(|l| l.contains("\tdeliver\t"))
        .collect();
    let last = delivered.last().expect("the smoke scenario delivers data");
    let tampered = format!("{text}{last}\n");
    fs::write(&trace, tampered).unwrap();

    let check = manet(&["check", "--trace", trace.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(1), "stderr: {}", stderr_of(&check));
    assert!(
        stderr_of(&check).contains("violation:"),
        "stderr: {}",
        stderr_of(&check)
    );
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = scratch();
    let config = dir.join("bad.conf");
    fs::write(&config, "node_count = 10\nwarp_speed = 9\n").unwrap();

    let out = manet(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("line 2"), "stderr: {err}");
    assert!(err.contains("warp_speed"), "stderr: {err}");
}
