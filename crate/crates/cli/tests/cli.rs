use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nhbrack(args: &[&str], env_threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nhbrack"));
    cmd.args(args).env_remove("NHBRACK_THREADS");
    if let Some(t) = env_threads {
        cmd.env("NHBRACK_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run(experiment: &str, cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![experiment, "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    nhbrack(&args, None)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn jacobi_check_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"jacobi": {"trials": 100}}"#);
    let out = run("jacobi-check", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let lines = stdout(&out);
    assert!(lines.lines().count() >= 4);
    assert!(lines.lines().all(|l| l.starts_with("PASS ")));
    let j: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("out/jacobi.json")).unwrap()).unwrap();
    assert!(j["qc_generic"].as_f64().unwrap() > 0.5);
}

#[test]
fn bracket_verify_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"bracket": {"points": 20, "dof": 2}}"#);
    let out = run("bracket-verify", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    assert!(tmp.path().join("out/bracket.json").exists());
}

#[test]
fn zero_steps_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"sampling": {"steps": 0, "trajectories": 1}}"#);
    let out = run("sample-canonical", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("insufficient samples"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"sampling": {"stpes": 10}}"#);
    let out = run("sample-canonical", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sampling.stpes"), "{}", stderr(&out));
}

#[test]
fn malformed_inputs_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let bad_json = write_config(tmp.path(), "a.json", "{ not json");
    let wrong_exp = write_config(tmp.path(), "b.json", r#"{"experiment": "qcle-run"}"#);
    let bad_dt = write_config(tmp.path(), "c.json", r#"{"classical": {"dt": -1}}"#);
    let out_dir = tmp.path().join("out");
    for (exp, cfg) in [("jacobi-check", &bad_json), ("jacobi-check", &wrong_exp), ("classical-run", &bad_dt)] {
        let o = run(exp, cfg, &out_dir, &[]);
        assert_eq!(o.status.code(), Some(2), "{exp} {cfg}: {}", stderr(&o));
    }
    let missing = tmp.path().join("absent.json");
    let o = run("jacobi-check", missing.to_str().unwrap(), &out_dir, &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = nhbrack(&["no-such-experiment", "--config", &bad_dt], None);
    assert_eq!(o.status.code(), Some(2));
    let ok = write_config(tmp.path(), "d.json", "{}");
    let o = nhbrack(&["jacobi-check", "--config", &ok, "--out", out_dir.to_str().unwrap()], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", "{}");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run("jacobi-check", &cfg, &blocker.join("sub"), &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"sampling": {"steps": 20000, "burn_in": 1000, "trajectories": 4, "ks_tol": 1.0, "slope_tol": 1.0}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(run("sample-canonical", &cfg, &a, &["--threads", "1", "--seed", "9"]).status.code(), Some(0));
    let o = nhbrack(
        &["sample-canonical", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "9"],
        Some("4"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(run("sample-canonical", &cfg, &c, &["--threads", "2", "--seed", "10"]).status.code(), Some(0));
    for f in ["p_marginal.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("p_marginal.csv")).unwrap(), fs::read(c.join("p_marginal.csv")).unwrap());

    let cfg = write_config(tmp.path(), "q.json", r#"{"qcle": {"grid": {"r": {"min": -5, "max": 5, "n": 24}, "p": {"min": -5, "max": 5, "n": 24}}, "time": 0.5, "trace_tol": 1.0}}"#);
    let qa = tmp.path().join("qa");
    let qb = tmp.path().join("qb");
    assert_eq!(run("qcle-run", &cfg, &qa, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run("qcle-run", &cfg, &qb, &["--threads", "3"]).status.code(), Some(0));
    for f in ["diagnostics.csv", "snapshot.csv"] {
        assert_eq!(fs::read(qa.join(f)).unwrap(), fs::read(qb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn classical_run_writes_trajectory() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"ensemble": {"kind": "nose"}, "classical": {"initial": [1.0, 0.4, 0.5, -0.3], "steps": 5000, "stride": 50}}"#,
    );
    let out = run("classical-run", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let traj = fs::read_to_string(tmp.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,R,eta,P,p_eta,H,w");
    assert_eq!(traj.lines().count(), 1 + 101);
    let energy = fs::read_to_string(tmp.path().join("out/energy.csv")).unwrap();
    assert_eq!(energy.lines().next().unwrap(), "t,H");

    let cfg = write_config(tmp.path(), "d.json", r#"{"ensemble": {"kind": "nose"}, "classical": {"initial": [1.0, 0.4]}}"#);
    assert_eq!(run("classical-run", &cfg, &tmp.path().join("out2"), &[]).status.code(), Some(2));
}

#[test]
fn stationary_check_writes_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"stationary": {"nodes": 14, "extent": 6, "thermostat_nodes": 10, "thermostat_extent": 5, "sigma_e": [0.2, 0.1]}}"#,
    );
    let out = run("stationary-check", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    let r: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("out/stationary_report.json")).unwrap()).unwrap();
    for key in ["order0_residual", "order1_residual", "marginal_slope", "marginal_fit_residual", "fredholm_max"] {
        assert!(r[key].is_number(), "{key}");
    }
    let series = r["sigma_E_series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    for p in series {
        assert!(p["sigma_E"].is_number() && p["mean_kinetic"].is_number() && p["marginal_slope"].is_number());
    }
    assert!((r["marginal_slope"].as_f64().unwrap() + 1.0).abs() < 1e-6);
}
