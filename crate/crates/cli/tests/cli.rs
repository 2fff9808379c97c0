use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lpvsos::sdp::{export_sdpa, import_sdpa};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lpvsos"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn problem(name: &str) -> String {
    root().join("problems").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn load_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn validate(schema_file: &str, doc: &Value) {
    let read = |f: &str| -> Value {
        serde_json::from_str(&std::fs::read_to_string(root().join("schemas").join(f)).unwrap()).unwrap()
    };
    let problem = read("problem.schema.json");
    let registry = jsonschema::Registry::new()
        .add("https://lpvsos.example/schemas/problem.schema.json", problem)
        .unwrap()
        .prepare()
        .unwrap();
    let schema = read(schema_file);
    let validator = jsonschema::options().with_registry(&registry).build(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{}: {e}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

#[test]
fn quadratic_boundary_of_example1_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.json");
    let bad = dir.path().join("bad.json");
    let o = run(&["analyze", "--mode", "quadratic", "--problem", &problem("ex1.json"), "--out", ok.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["analyze", "--mode", "quadratic", "--problem", &problem("ex1-rho3.9.json"), "--out", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    let ok_json = load_json(&ok);
    validate("result.schema.json", &ok_json);
    assert_eq!(ok_json["status"], "feasible");
    assert_eq!(ok_json["grid_check"]["passed"], true);
    let bad_json = load_json(&bad);
    validate("result.schema.json", &bad_json);
    assert_eq!(bad_json["status"], "infeasible");
    assert!(bad_json.get("certificate").is_none());
}

#[test]
fn problem_files_match_the_schema() {
    for entry in std::fs::read_dir(root().join("problems")).unwrap() {
        let path = entry.unwrap().path();
        validate("problem.schema.json", &load_json(&path));
    }
}

#[test]
fn feasible_result_round_trips_through_check_and_a_tampered_one_fails() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("md.json");
    let o = run(&[
        "analyze", "--mode", "min-dwell", "--problem", &problem("ex1.json"), "--degree", "2", "--dwell", "1.5",
        "--out", res.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = load_json(&res);
    validate("result.schema.json", &doc);

    let report = dir.path().join("check.json");
    let o = run(&["check", "--cert", res.to_str().unwrap(), "--grid", "50", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = load_json(&report);
    assert_eq!(report["status"], "passed");
    assert!(report["grid_check"]["max_lmi_eig"].as_f64().unwrap() <= 1e-6);

    let mut flipped = doc.clone();
    for entry in flipped["certificate"]["S"]["coefficients"].as_array_mut().unwrap() {
        for c in entry.as_array_mut().unwrap() {
            *c = Value::from(-c.as_f64().unwrap());
        }
    }
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string_pretty(&flipped).unwrap()).unwrap();
    let o = run(&["check", "--cert", tampered.to_str().unwrap(), "--grid", "50"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("check failed") && err.contains("rho="), "{err}");
    let out: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(out["status"], "failed");
    let failed: Vec<&Value> =
        out["grid_check"]["conditions"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|c| !c["worst_point"].as_array().unwrap().is_empty()));
}

#[test]
fn schema_errors_carry_json_pointers_and_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"name":"x","n":"2","A":[[0]]}"#, "/n:"),
        (r#"{"name":"x","n":2,"params":[{"name":"r","min":0,"max":1}],"A":[[0,1],["q",0]]}"#, "/A/1/0:"),
        (r#"{"name":"x","n":2,"A":[[0,1],[-1,-1]],"extra":1}"#, "/extra:"),
        (r#"{"name":"x","n":2,"params":[{"name":"r","min":1,"max":0}],"A":[[0,1],[-1,-1]]}"#, "/params/0"),
        (r#"{"name":"x","n":2,"A":[[0,1],[-1]]}"#, "/A/1"),
    ];
    for (i, (text, pointer)) in cases.iter().enumerate() {
        let f = dir.path().join(format!("p{i}.json"));
        std::fs::write(&f, text).unwrap();
        let o = run(&["analyze", "--mode", "quadratic", "--problem", f.to_str().unwrap()]);
        assert_eq!(code(&o), 64, "{text}");
        assert!(stderr(&o).contains(pointer), "{text}: {}", stderr(&o));
    }

    let res = dir.path().join("res.json");
    std::fs::write(&res, r#"{"command":"analyze","status":"feasible"}"#).unwrap();
    let o = run(&["check", "--cert", res.to_str().unwrap()]);
    assert_eq!(code(&o), 64);
}

#[test]
fn usage_errors_exit_64() {
    let p = problem("ex1.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["analyze", "--mode", "min-dwell", "--problem", &p],
        vec!["analyze", "--mode", "min-dwell", "--problem", &p, "--dwell", "1", "--bisect", "0.1:2:0.1"],
        vec!["analyze", "--mode", "min-dwell", "--problem", &p, "--bisect", "2:1:0.1"],
        vec!["analyze", "--mode", "quadratic", "--problem", &p, "--dwell", "1"],
        vec!["analyze", "--mode", "range-dwell", "--problem", &p],
        vec!["synthesize", "--mode", "sd", "--problem", &p, "--dwell", "1"],
        vec!["analyze", "--mode", "sideways", "--problem", &p],
        vec!["analyze", "--mode", "quadratic", "--problem", "/nonexistent/problem.json"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(code(&o), 64, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn synthesis_without_input_is_a_usage_error() {
    let o = run(&["synthesize", "--mode", "ct", "--problem", &problem("ex1.json"), "--dwell", "1"]);
    assert_eq!(code(&o), 64, "{}", stderr(&o));
}

#[test]
fn bisection_finds_the_example1_dwell_time_and_reports_missing_certificates() {
    let o = run(&["analyze", "--mode", "min-dwell", "--problem", &problem("ex1-rho10.json"), "--bisect", "0.05:3:0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    validate("result.schema.json", &doc);
    let est = doc["bisection"]["estimate"].as_f64().unwrap();
    assert_eq!(doc["mode"]["dwell"].as_f64().unwrap(), est);
    assert!(doc["bisection"]["probes"].as_array().unwrap().len() >= 3);

    let o = run(&["analyze", "--mode", "min-dwell", "--problem", &problem("ex1-rho10.json"), "--bisect", "0.001:0.002:0.0005"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    validate("result.schema.json", &doc);
    assert_eq!(doc["status"], "infeasible");
}

#[test]
fn closed_loop_simulation_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("ct.json");
    let o = run(&[
        "synthesize", "--mode", "ct", "--problem", &problem("ct-synthesis.json"), "--dwell", "0.05", "--out",
        res.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = load_json(&res);
    validate("result.schema.json", &doc);
    assert_eq!(doc["gain"]["kind"], "continuous");

    let csv_path = dir.path().join("traj.csv");
    let o = run(&[
        "simulate", "--gain", res.to_str().unwrap(), "--traj", "phase-jump", "--nu", "0.3", "--seed", "7",
        "--horizon", "10", "--out", csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["final_norm"].as_f64().unwrap() <= 1e-2 * summary["initial_norm"].as_f64().unwrap());
    assert!(summary["jump_violation"].as_f64().unwrap() <= 1e-9);

    let parsed = lpvsos::sim::read_csv(std::fs::File::open(&csv_path).unwrap()).unwrap();
    assert_eq!(parsed.headers, ["time", "x1", "x2", "u1", "rho", "V", "post_jump"]);
    assert_eq!(parsed.rows.len() as u64, summary["samples"].as_u64().unwrap());
    let post = parsed.column("post_jump").unwrap();
    assert_eq!(post.iter().filter(|&&v| v == 1.0).count() as u64, summary["jumps"].as_u64().unwrap());
    let t = parsed.column("time").unwrap();
    assert!(t.windows(2).all(|w| w[1] >= w[0]));
    assert!((t.last().unwrap() - 10.0).abs() < 1e-9);
}

#[test]
fn sampled_data_design_simulates_with_held_input() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("sd.json");
    let o = run(&[
        "synthesize", "--mode", "sd", "--problem", &problem("sd-synthesis-a.json"), "--range", "0.001:0.6", "--out",
        res.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = load_json(&res);
    validate("result.schema.json", &doc);
    assert_eq!(doc["gain"]["kind"], "sampled-data");

    let o = run(&["simulate", "--gain", res.to_str().unwrap(), "--traj", "sin", "--nu", "0.2", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(summary["flow_violation"].as_f64().unwrap() <= 1e-6);
    assert!(summary["jump_violation"].as_f64().unwrap() <= 1e-6);
    let parsed = lpvsos::sim::read_csv(o.stdout.as_slice()).unwrap();
    let u = parsed.column("u1").unwrap();
    let post = parsed.column("post_jump").unwrap();
    // The input only changes at jumps.
    for i in 1..u.len() {
        if post[i] == 0.0 {
            assert_eq!(u[i], u[i - 1], "row {i}");
        }
    }
}

#[test]
fn exported_sdpa_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("quadratic", vec!["--problem", "ex1.json"]),
        ("min-dwell", vec!["--problem", "ex1.json", "--dwell", "1"]),
        ("range-dwell", vec!["--problem", "ex1.json", "--range", "0.5:1"]),
        ("ct", vec!["--problem", "ct-synthesis.json", "--dwell", "0.05"]),
        ("sd", vec!["--problem", "sd-synthesis-b.json", "--range", "0.01:0.2"]),
    ];
    for (mode, args) in cases {
        let out = dir.path().join(format!("{mode}.dat-s"));
        let mut full = vec!["export-sdpa", "--mode", mode, "--out", out.to_str().unwrap()];
        let owned: Vec<String> =
            args.iter().map(|a| if a.ends_with(".json") { problem(a) } else { a.to_string() }).collect();
        full.extend(owned.iter().map(String::as_str));
        let o = run(&full);
        assert_eq!(code(&o), 0, "{mode}: {}", stderr(&o));
        let text = std::fs::read_to_string(&out).unwrap();
        let p = import_sdpa(&text).unwrap();
        assert_eq!(export_sdpa(&p), text, "{mode}");
        assert!(p.n_rows() > 0);
    }
}
