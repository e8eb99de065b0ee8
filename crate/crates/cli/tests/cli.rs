use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heli-smc"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_bad_flags() {
    let help = run(&["--help"]);
    assert!(help.status.success());
    assert!(stdout(&help).contains("simulate"));
    let bad = run(&["simulate", "--no-such-flag"]);
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("Usage"), "{}", stderr(&bad));
}

#[test]
fn simulate_writes_csv_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("experiment1_afssosmc.toml");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "duration=2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut files: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    files.sort();
    assert_eq!(files, ["experiment1_afssosmc.csv", "experiment1_afssosmc.metrics.txt"]);
    let text = stdout(&o);
    assert!(text.contains("experiment1_afssosmc elevation:") && text.contains("experiment1_afssosmc pitch:"));
    let metrics = fs::read_to_string(dir.path().join("experiment1_afssosmc.metrics.txt")).unwrap();
    assert!(metrics.contains("elevation.convergence_time_s = "));
}

#[test]
fn missing_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("experiment1_afssosmc.toml")).unwrap();
    let cut: String = text.lines().filter(|l| !l.trim_start().starts_with("k4")).map(|l| format!("{l}\n")).collect();
    let path = dir.path().join("broken.toml");
    fs::write(&path, cut).unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k4"), "{}", stderr(&o));
}

#[test]
fn infeasible_gains_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("experiment1_afssosmc.toml");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "controller.elevation.k4=1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("lhs = 36") && err.contains("rhs = 962.5"), "{err}");
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unknown_override_key_is_rejected() {
    let cfg = scenario("experiment1_afssosmc.toml");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--set", "controller.elevation.k5=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k5"), "{}", stderr(&o));
}

#[test]
fn blowup_exits_nonzero_and_keeps_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("experiment2_afssosmc.toml");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "disturbance.elevation.amplitude=5",
        "--set",
        "disturbance.elevation.frequency=3",
        "--set",
        "duration=6",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("terminated early"));
    let csv = fs::read_to_string(dir.path().join("experiment2_afssosmc.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert!(rows > 1000 && rows < 6001, "{rows}");
}

#[test]
fn certify_reports() {
    let o = run(&["certify"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("feasible, margin 117.5"), "{}", stdout(&o));
    assert!(stdout(&o).contains("status: certified"));

    let o = run(&["certify", "--m", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("comparison family (m=2)"));

    let o = run(&["certify", "--k4", "0"]);
    assert!(stdout(&o).contains("infeasible"));

    let o = run(&["certify", "--m", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["certify", "--key-value", "--delta", "0.2", "--v0", "1"]);
    let kv = stdout(&o);
    assert!(kv.lines().all(|l| l.contains(" = ")), "{kv}");
    assert!(kv.contains("feasibility.lhs = 1080") && kv.contains("bounds.theta3 = "));
}

#[test]
fn reproduce_writes_views_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["reproduce", "1", "--out", out, "--set", "duration=2", "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csvs = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 4);
    assert!(dir.path().join("comparison.txt").exists());
    assert!(dir.path().join("scenarios/experiment1_afssosmc.toml").exists());

    let dir3 = tempfile::tempdir().unwrap();
    let o = run(&["reproduce", "3", "--out", dir3.path().to_str().unwrap(), "--set", "duration=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir3.path().join("experiment3_assosmo.csv").exists());
    assert!(dir3.path().join("experiment3_asosmo.csv").exists());
    assert!(fs::read_to_string(dir3.path().join("comparison.txt")).unwrap().contains("observer.estimate_tv"));

    let o = run(&["reproduce", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("invalid value '4'"), "{}", stderr(&o));
}

#[test]
fn job_count_does_not_change_results() {
    let cfgs = [scenario("experiment1_afssosmc.toml"), scenario("experiment1_intsm_afsosmc.toml")];
    let mut outputs = Vec::new();
    for jobs in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(&[
            "simulate",
            "--config",
            cfgs[0].to_str().unwrap(),
            "--config",
            cfgs[1].to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--set",
            "duration=2",
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let a = fs::read(dir.path().join("experiment1_afssosmc.csv")).unwrap();
        let b = fs::read(dir.path().join("experiment1_intsm_afsosmc.csv")).unwrap();
        outputs.push((a, b));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn compare_reads_csvs_and_checks_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (name, dur) in [("experiment2_afssosmc.toml", "2"), ("experiment2_intsm_afsosmc.toml", "2")] {
        let cfg = scenario(name);
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out, "--set", &format!("duration={dur}")]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = dir.path().join("experiment2_afssosmc.csv");
    let b = dir.path().join("experiment2_intsm_afsosmc.csv");
    let table = dir.path().join("cmp.txt");
    let o = run(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--out", table.to_str().unwrap(), "--steady-window", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("elevation.control_tv"));
    assert!(table.exists());

    let short = dir.path().join("short");
    let cfg = scenario("experiment2_afssosmc.toml");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", short.to_str().unwrap(), "--set", "duration=1"]);
    assert!(o.status.success());
    let o = run(&["compare", a.to_str().unwrap(), short.join("experiment2_afssosmc.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("time grids differ"), "{}", stderr(&o));
}
