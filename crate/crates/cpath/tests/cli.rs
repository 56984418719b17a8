use std::path::Path;
use std::process::{Command, Output};

fn cpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpath"))
        .args(args)
        .env_remove("CPATH_LAB_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trace_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = cpath(&["trace", "--instance", "deg-twin", "--out", arg(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[0].starts_with("step,mu,x_0,norm_d,mu_over_normd"));
    let last: Vec<&str> = lines[7].split(',').collect();
    assert!((last[2].parse::<f64>().unwrap() - 2e-7).abs() < 1e-15);
}

#[test]
fn unknown_instance_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = cpath(&["trace", "--instance", "nope", "--out", arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("deg-twin"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn invalid_schedule_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = cpath(&["verify", "--instance", "deg-twin", "--sigma", "2", "--out", arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert_eq!(
        code(&cpath(&["trace", "--instance", "deg-twin", "--mode", "sideways"])),
        2
    );
    assert_eq!(code(&cpath(&["frobnicate"])), 2);
}

#[test]
fn bad_seed_variable_exits_two() {
    let o = Command::new(env!("CARGO_BIN_EXE_cpath"))
        .args(["conditions", "--instance", "deg-twin"])
        .env("CPATH_LAB_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_passes_and_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = cpath(&["verify", "--instance", "deg-mixed", "--out", arg(p)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(v["overall"], serde_json::Value::Bool(true));
    assert_eq!(v["instance"], "deg-mixed");
}

#[test]
fn verify_all_writes_one_report_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let o = cpath(&["verify", "--all", "--jobs", "3", "--out", arg(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in [
        "deg-twin",
        "deg-cross",
        "deg-mixed",
        "nondeg-control",
        "deg-curve",
        "rand-qmi_42_3",
    ] {
        assert!(dir.path().join(format!("{name}.json")).is_file(), "{name}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 6);
}

#[test]
fn seed_variable_overrides_flag() {
    let run = |env: Option<&str>, flag: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_cpath"));
        c.args(["verify", "--instance", "deg-twin", "--seed", flag]);
        match env {
            Some(v) => c.env("CPATH_LAB_SEED", v),
            None => c.env_remove("CPATH_LAB_SEED"),
        };
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0);
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["seed"].clone()
    };
    assert_eq!(run(Some("7"), "3"), serde_json::json!(7));
    assert_eq!(run(None, "3"), serde_json::json!(3));
}

#[test]
fn text_commands() {
    let o = cpath(&["list-instances"]);
    assert_eq!(code(&o), 0);
    for name in cpath_core::lab::REGISTRY {
        assert!(stdout(&o).contains(name));
    }

    let o = cpath(&["check", "--instance", "deg-curve"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    let o = cpath(&["conditions", "--instance", "deg-twin"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("NC     false"), "{}", stdout(&o));

    let o = cpath(&["analytic-center", "--instance", "deg-mixed"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Y_a ="));

    let o = cpath(&["xistar", "--instance", "deg-mixed"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("xi* = [")).unwrap();
    let xi: Vec<f64> = line["xi* = [".len()..line.len() - 1]
        .split(", ")
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(
        (xi[0] - 2.0).abs() < 1e-9 && xi[1].abs() < 1e-9 && xi[2].abs() < 1e-9,
        "{line}"
    );
}

#[test]
fn file_instances_need_points_when_absent() {
    let dir = tempfile::tempdir().unwrap();
    let b = cpath_core::lab::builtin_instance("deg-twin").unwrap();
    let path = dir.path().join("twin.json");
    cpath::qmi_file::save_qmi(&path, &b.instance, None, None).unwrap();
    let out = dir.path().join("t.csv");
    let o = cpath(&["trace", "--instance", arg(&path), "--out", arg(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    let o = cpath(&[
        "trace",
        "--instance",
        arg(&path),
        "--x0",
        "1",
        "--xstar",
        "0",
        "--out",
        arg(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 8);
}
