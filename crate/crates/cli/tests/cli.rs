use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn canonme(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_canonme"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CANONME_THREADS", t),
        None => cmd.env_remove("CANONME_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const COS: &str = r#"{
  "model": {
    "kind": "dephasing",
    "parameters": { "gamma": "cos(t)" },
    "grid": { "t0": 0, "t1": "2*pi", "steps": 2000 }
  }
}"#;

#[test]
fn cosine_series_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cos.json", COS);
    let out = dir.path().join("cos.csv");
    let r = canonme(&["series", "--config", s(&cfg), "--output", s(&out)], None);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,gamma_1,gamma_2,gamma_3,f_sum,F_sum_running,nm_index,singular"
    );
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let f: f64 = last[5].parse().unwrap();
    assert!((f + 2.0).abs() < 1e-3, "{f}");
    assert_eq!(csv.lines().count(), 2002);
}

#[test]
fn output_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "mixed.json",
        r#"{ "model": { "kind": "paper_example",
             "parameters": { "gamma": "sin(t)", "gamma_tilde": "-0.5*cos(2*t)" },
             "grid": { "t0": 0, "t1": 8, "steps": 800 } } }"#,
    );
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "0", "0"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.csv"));
        let r = canonme(
            &["series", "--config", s(&cfg), "--output", s(&out)],
            Some(threads),
        );
        assert!(r.status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn dimension_mismatch_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.json",
        r#"{ "model": { "kind": "lindblad_terms", "dim": 3,
             "channels": [{ "rate": 1, "operator": "sigma_z" }],
             "grid": { "t0": 0, "t1": 1, "steps": 10 } } }"#,
    );
    let out = dir.path().join("bad.csv");
    let r = canonme(&["series", "--config", s(&cfg), "--output", s(&out)], None);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unreadable_config_and_bad_env_exit_2() {
    let r = canonme(&["series", "--config", "/nonexistent/config.json"], None);
    assert_eq!(r.status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cos.json", COS);
    let r = canonme(&["series", "--config", s(&cfg)], Some("many"));
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "pole.json",
        r#"{ "model": { "kind": "dephasing", "parameters": { "gamma": "1/(t-0.5)" },
             "grid": { "t0": 0, "t1": 1, "steps": 10 } } }"#,
    );
    let out = dir.path().join("pole.csv");
    let r = canonme(&["series", "--config", s(&cfg), "--output", s(&out)], None);
    assert_eq!(r.status.code(), Some(3));
    assert!(!out.exists());
    let report = std::fs::read_to_string(dir.path().join("pole.csv.failure.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["status"], "numerical_failure");
}

#[test]
fn singular_canon_exits_3_with_flagged_time() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "jc.json",
        r#"{ "model": { "kind": "jc_amplitude_damping",
             "parameters": { "lambda": 1, "gamma0": 10 },
             "grid": { "t0": 0, "t1": 2, "steps": 200 } },
             "canon_time": 0.4 }"#,
    );
    let out = dir.path().join("canon.json");
    let r = canonme(
        &[
            "canon",
            "--config",
            s(&cfg),
            "--output",
            s(&out),
            "--cond-max",
            "1.5",
        ],
        None,
    );
    assert_eq!(r.status.code(), Some(3));
    let report = std::fs::read_to_string(dir.path().join("canon.json.failure.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(v["flagged"][0]["condition_number"].as_f64().unwrap() > 1.5);
}

#[test]
fn identity_map_file_gives_zero_rates() {
    let dir = TempDir::new().unwrap();
    let id: Vec<Vec<[f64; 2]>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| [if i == j { 1.0 } else { 0.0 }, 0.0])
                .collect()
        })
        .collect();
    let maps = serde_json::json!({ "times": [0.0, 0.25, 0.5, 0.75, 1.0], "maps": vec![id; 5] });
    write(&dir, "maps.json", &maps.to_string());
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{ "model": { "kind": "map_family_file", "dim": 2, "file": "maps.json" } }"#,
    );
    let r = canonme(&["series", "--config", s(&cfg)], None);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = String::from_utf8(r.stdout).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(&f[1..], ["0.0", "0.0", "0.0", "0.0", "0.0", "0", "false"]);
    }
}

#[test]
fn canon_and_measures_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cos.json", COS);
    let r = canonme(&["canon", "--config", s(&cfg), "--t0", "1"], None);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["time"], 1.0);
    let rate = v["channels"][0]["rate"].as_f64().unwrap();
    assert!((rate - 1f64.cos()).abs() < 1e-12);

    let r = canonme(&["measures", "--config", s(&cfg), "--format", "json"], None);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!((v["F_sum"].as_f64().unwrap() + 2.0).abs() < 1e-3);
    assert_eq!(v["excluded_intervals"].as_array().unwrap().len(), 0);
}

#[test]
fn grid_and_tolerance_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cos.json", COS);
    let r = canonme(
        &[
            "series",
            "--config",
            s(&cfg),
            "--t1",
            "4",
            "--steps",
            "8",
            "--tol-neg",
            "0.5",
        ],
        None,
    );
    assert!(r.status.success());
    let csv = String::from_utf8(r.stdout).unwrap();
    assert_eq!(csv.lines().count(), 10);
    // cos t < -0.5 only for t in (2π/3, 4π/3)
    let idx: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap())
        .collect();
    assert_eq!(idx, ["0", "0", "0", "0", "0", "1", "1", "1", "1"]);

    let r = canonme(&["series", "--config", s(&cfg), "--tol-neg", "-1"], None);
    assert_eq!(r.status.code(), Some(2));
}
