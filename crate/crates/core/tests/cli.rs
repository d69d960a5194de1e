use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modelfree")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn run_into(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--scenario", scenario, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn list_names_every_scenario() {
    let o = cli(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["oscillator-ipi", "spring-ipid", "lti-fault", "delay-varying", "heat-4", "correspondence-check"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_into(dir.path(), "bogus", &[])), 2);
    assert_eq!(code(&run_into(dir.path(), "heat-1", &["--override", "nope=1"])), 2);
    assert_eq!(code(&run_into(dir.path(), "heat-1", &["--override", "ip.kp"])), 2);
    assert_eq!(code(&run_into(dir.path(), "heat-1", &["--duration", "-1"])), 2);
    assert_eq!(code(&run_into(dir.path(), "heat-1", &["--duration", "3"])), 2);
    let diverged = run_into(dir.path(), "nonlinear-cubic", &["--override", "ip.kp=-50"]);
    assert_eq!(code(&diverged), 3);
    assert!(String::from_utf8_lossy(&diverged.stderr).contains("step"));
    assert_eq!(code(&cli(&["verify-correspondence", "--n", "0"])), 2);
}

#[test]
fn verify_correspondence_reports_all_rows() {
    let o = cli(&["verify-correspondence", "--n", "20", "--h", "0.005"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for row in ["iP->PI", "iPD->PID", "iPI->PI2", "iPID->PI2D"] {
        assert!(text.contains(row));
    }
    // α = 1, K_P = 2, h = 0.005: k_p = −1/(αh) = −200
    assert!(text.contains("k_p=-200"), "{text}");
}

#[test]
fn run_writes_schema_and_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run_into(d.path(), "heat-1", &["--duration", "9", "--seed", "4"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.path().join("heat-1/ip.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("heat-1/ip.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,setpoint,y_ref,dy_ref,y_true,y_meas,u_cmd,u_eff,F_est,aux");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 901);
    assert!(rows.iter().all(|r| r.split(',').count() == 10 && r.ends_with(',')));

    let field = fs::read_to_string(a.path().join("heat-1/field_ip.csv")).unwrap();
    assert!(field.starts_with("t,x,w\n"));
    assert_eq!((field.lines().count() - 1) % 101, 0);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("heat-1/metrics.json")).unwrap()).unwrap();
    for key in ["rms_error", "iae", "max_abs_error", "control_effort"] {
        assert!(metrics["ip"][key].is_number(), "{key}");
    }
    assert!(metrics["ip"].get("recovery_time").is_none());
    assert!(a.path().join("heat-1/summary.txt").exists());
    assert!(fs::read_dir(a.path().join("heat-1")).unwrap().all(|e| {
        !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")
    }));
}

#[test]
fn columns_follow_controller_and_plant() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_into(d.path(), "lti-fault", &["--duration", "10"])), 0);
    assert_eq!(code(&run_into(d.path(), "delay-varying", &["--duration", "31"])), 0);

    let pid = fs::read_to_string(d.path().join("lti-fault/pid.csv")).unwrap();
    let row: Vec<&str> = pid.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[8], row[9]), ("", ""));
    let late: Vec<&str> = pid.lines().last().unwrap().split(',').collect();
    let (cmd, eff): (f64, f64) = (late[6].parse().unwrap(), late[7].parse().unwrap());
    assert!((eff - 0.5 * cmd).abs() <= 1e-12 * cmd.abs().max(1.0));

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("lti-fault/metrics.json")).unwrap()).unwrap();
    // two seconds after the fault the PID loop is still outside the band
    assert!(metrics["pid"]["recovery_time"].is_null());
    assert_eq!(metrics["ip"]["recovery_time"], 0.0);

    let delay = fs::read_to_string(d.path().join("delay-varying/ip.csv")).unwrap();
    let row: Vec<&str> = delay.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[9].parse::<f64>().unwrap(), 2.5);
    assert!(!row[8].is_empty());
}

#[test]
fn correspondence_scenario_writes_report() {
    let d = tempfile::tempdir().unwrap();
    let o = run_into(d.path(), "correspondence-check", &["--override", "n=50"]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(d.path().join("correspondence-check/metrics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert_eq!(report["n_random"], 50);
}
