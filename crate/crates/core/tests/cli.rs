use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use backstep::analysis::LyapunovTrace;
use backstep::expr::{equals_canonical, parse};
use backstep::io::export::RunRecord;
use backstep::registry::{get_example, list_examples};
use tempfile::TempDir;

fn backstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backstep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const LINEAR2D: &str = "\
system \"linear2d\"
state x1 = a*x1 + x2
state x2 = u
control u
param a = 1.0
gain k1 = 2.0
gain k2 = 3.0
init 1.0, 1.0
sim t0=0 tf=10 dt=0.001 method=rk4
";

#[test]
fn derive_prints_the_law() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "l.sys", LINEAR2D);
    let o = backstep(&["derive", &f]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("u = -a*k1*x1 - k1*k2*x1 - k1*x2 - k2*x2\n"),
        "{text}"
    );
    assert!(text.contains("z2 = k1*x1 + x2\n"));
    assert!(text.contains("phi1 = -k1*x1\n"));
    assert!(text.lines().any(|l| l.starts_with("Vc = ")));

    let o = backstep(&["derive", "--json", &f]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["law"], "-a*k1*x1 - k1*k2*x1 - k1*x2 - k2*x2");
}

#[test]
fn derive_vanderpol_example_file() {
    let dir = TempDir::new().unwrap();
    let ex = get_example("vanderpol").unwrap();
    let f = write(dir.path(), "v.sys", &ex.source);
    let text = stdout(&backstep(&["derive", &f]));
    assert!(text.contains("mu*x1^2*x2"), "{text}");
}

#[test]
fn invalid_files_exit_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("empty.sys", ""),
        (
            "control_early.sys",
            "state x1 = u\nstate x2 = x1\ncontrol u\ngain k1 = 1\ngain k2 = 1\ninit 0, 0\n",
        ),
        (
            "negative_gain.sys",
            &LINEAR2D.replace("gain k2 = 3.0", "gain k2 = -1"),
        ),
        ("gain_count.sys", &LINEAR2D.replace("gain k2 = 3.0\n", "")),
    ];
    for (name, text) in cases {
        let f = write(dir.path(), name, text);
        let out = dir.path().to_str().unwrap();
        for args in [vec!["derive", &f], vec!["simulate", &f, "--out-dir", out]] {
            let o = backstep(&args);
            assert_eq!(
                o.status.code(),
                Some(2),
                "{args:?}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            assert!(!o.stderr.is_empty());
        }
    }
    let o = backstep(&["derive", "/nonexistent/file.sys"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn simulate_writes_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "l.sys", LINEAR2D);
    let out = dir.path().join("run");
    let o = backstep(&[
        "simulate",
        &f,
        "--closed-loop",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "t,x1,x2,u");
    assert_eq!(rows.len(), 10_002);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));

    let json = fs::read_to_string(out.join("results.json")).unwrap();
    let run: RunRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(run.trajectory.t.len(), 10_001);
    assert!(run.metrics.settling_time.unwrap() < 10.0);
    assert!(run.lyapunov.as_ref().unwrap().nonincreasing);
    // every float survives the text round trip
    let last_row: Vec<f64> = rows[10_001]
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last_row[1], run.trajectory.x[10_000][0]);
    assert_eq!(last_row[3], run.trajectory.u[10_000]);
    let again: RunRecord = serde_json::from_str(&serde_json::to_string(&run).unwrap()).unwrap();
    assert_eq!(again, run);

    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in [
        "system",
        "law",
        "gains",
        "sim",
        "trajectory",
        "metrics",
        "lyapunov",
    ] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    let lyap: LyapunovTrace = serde_json::from_value(value["lyapunov"].clone()).unwrap();
    assert_eq!(
        value["lyapunov"]["v"].as_array().unwrap().len(),
        lyap.values.len()
    );

    let states = fs::read_to_string(out.join("states.svg")).unwrap();
    assert_eq!(states.matches("<polyline").count(), 2);
    let control = fs::read_to_string(out.join("control.svg")).unwrap();
    assert_eq!(control.matches("<polyline").count(), 1);
}

#[test]
fn jerk_open_loop_runs_without_a_law() {
    let dir = TempDir::new().unwrap();
    let o = backstep(&[
        "example",
        "vaidyanathan_jerk",
        "--open-loop",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let run: RunRecord =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap())
            .unwrap();
    assert_eq!(run.law, None);
    assert!(run.lyapunov.is_none());
    assert!(run.trajectory.u.iter().all(|u| *u == 0.0));
}

#[test]
fn divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let text = "state x1 = x1^2 + x2\nstate x2 = u\ncontrol u\ngain k1 = 1\ngain k2 = 1\ninit 1, 0\nsim tf=2\n";
    let f = write(dir.path(), "blow.sys", text);
    let o = backstep(&[
        "simulate",
        &f,
        "--open-loop",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at t = "));
}

#[test]
fn every_example_runs_end_to_end() {
    for id in list_examples() {
        let dir = TempDir::new().unwrap();
        let o = backstep(&["example", id, "--out-dir", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{id}");
        let ex = get_example(id).unwrap();
        let law = stdout(&o)
            .lines()
            .find_map(|l| l.strip_prefix("u = ").map(str::to_string))
            .unwrap();
        assert_eq!(law, parse(ex.expected_law).unwrap().to_string(), "{id}");
        assert!(equals_canonical(
            &parse(&law).unwrap(),
            &parse(ex.expected_law).unwrap()
        ));
        let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let n = ex.model.n();
        assert!(csv.lines().all(|r| r.split(',').count() == n + 2));
        assert_eq!(csv.lines().count(), 10_002);
    }
    assert_eq!(backstep(&["example", "unknown"]).status.code(), Some(2));
}

#[test]
fn batch_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = backstep(&[
            "batch",
            "--count",
            "10",
            "--seed",
            "42",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 10);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["residual_check"], "0");
    }
    let o = backstep(&[
        "batch",
        "--count",
        "5",
        "--n-min",
        "2",
        "--n-max",
        "2",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("c")).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["system"]["states"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn list_and_export() {
    let text = stdout(&backstep(&["list"]));
    assert_eq!(text.lines().collect::<Vec<_>>(), list_examples());
    let dir = TempDir::new().unwrap();
    let o = backstep(&["export-examples", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for id in list_examples() {
        let text = fs::read_to_string(dir.path().join(format!("{id}.sys"))).unwrap();
        assert_eq!(text, get_example(id).unwrap().source);
    }
}

#[test]
fn shipped_example_files_match_the_registry() {
    let docs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples");
    for id in list_examples() {
        let text = fs::read_to_string(docs.join(format!("{id}.sys"))).unwrap();
        assert_eq!(text, get_example(id).unwrap().source, "{id}");
    }
}
