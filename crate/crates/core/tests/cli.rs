use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn riskalloc(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_riskalloc"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const FGM: &str = r#"{
  "model": {"kind": "fgm_exponential", "beta1": 0.05, "beta2": 0.25, "theta": 0.5},
  "capital": 50,
  "samples": 200000,
  "seed": 3,
  "sweep": {"parameter": "theta", "grid": {"start": -1, "stop": 1, "step": 0.1}}
}"#;

#[test]
fn solve_writes_a_json_report() {
    let ws = Workspace::new();
    let cfg = ws.file("c.json", FGM);
    let out = ws.path("r.json");
    let o = riskalloc(&["solve", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let fr = v["closed_form"]["fractions"].as_array().unwrap();
    let s: f64 = fr.iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((s - 1.0).abs() < 1e-12);
    assert!(v["closed_form"]["residual_norm"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn sweep_csv_has_expected_layout_and_is_reproducible() {
    let ws = Workspace::new();
    let cfg = ws.file("c.json", FGM);
    let a = ws.path("a.csv");
    let b = ws.path("b.csv");
    assert_eq!(code(&riskalloc(&["sweep", "--out", a.to_str().unwrap()], Some(&cfg))), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_riskalloc"))
        .args(["sweep", "--out", b.to_str().unwrap(), "--config"])
        .arg(&cfg)
        .env("RISKALLOC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "parameter,beta_frac,residual_norm,status");
    assert_eq!(lines.len(), 22);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 4);
        let beta: f64 = f[1].parse().unwrap();
        assert!(beta > 0.5 && beta < 1.0);
        assert!(f[2].parse::<f64>().unwrap() <= 1e-10);
        assert_eq!(f[3], "ok");
    }
}

#[test]
fn sweep_keeps_failed_points_as_error_rows() {
    let ws = Workspace::new();
    // lambda1 + lambda0 = lambda2 at lambda0 = 0.02 makes the parameters singular
    let cfg = ws.file(
        "mo.json",
        r#"{"model": {"kind": "marshall_olkin", "lambda0": 0.0, "lambda1": 0.05, "lambda2": 0.07},
            "capital": 50,
            "sweep": {"parameter": "lambda0", "grid": [0.0, 0.01, 0.02, 0.03]}}"#,
    );
    let o = riskalloc(&["sweep"], Some(&cfg));
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[2], "0.02,,,error");
    assert!(rows[1].ends_with(",ok") && rows[3].ends_with(",ok"));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_configs_exit_with_one() {
    let ws = Workspace::new();
    let cases = [
        ("not json", "{"),
        ("unknown field", r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25]},"capital":50,"colour":1}"#),
        ("negative rate", r#"{"model":{"kind":"independent_exponential","rates":[-0.05,0.25]},"capital":50}"#),
        ("zero capital", r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25]},"capital":0}"#),
        ("theta out of range", r#"{"model":{"kind":"fgm_exponential","beta1":0.05,"beta2":0.25,"theta":1.5},"capital":50}"#),
        ("sweep without grid", r#"{"model":{"kind":"fgm_exponential","beta1":0.05,"beta2":0.25,"theta":0.5},"capital":50}"#),
    ];
    for (label, body) in cases {
        let cfg = ws.file("bad.json", body);
        let cmd = if label == "sweep without grid" { "sweep" } else { "solve" };
        let o = riskalloc(&[cmd], Some(&cfg));
        assert_eq!(code(&o), 1, "{label}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(code(&riskalloc(&["solve"], None)), 1);
    assert_eq!(code(&riskalloc(&["solve"], Some(&ws.path("missing.json")))), 1);
    assert_eq!(code(&riskalloc(&["frobnicate"], None)), 1);
    assert_eq!(code(&riskalloc(&["--help"], None)), 0);
}

#[test]
fn solver_failure_exits_with_two() {
    let ws = Workspace::new();
    let cfg = ws.file(
        "c.json",
        r#"{"model":{"kind":"independent_exponential","rates":[0.05,0.25,0.5]},"capital":50,"solver":{"max_iter":1}}"#,
    );
    assert_eq!(code(&riskalloc(&["solve"], Some(&cfg))), 2);
}

#[test]
fn validate_passes_and_fails_on_threshold() {
    let ws = Workspace::new();
    let cfg = ws.file("c.json", FGM);
    let o = riskalloc(&["validate"], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let strict = FGM.replacen("\"seed\": 3,", "\"seed\": 3, \"validate\": {\"z_threshold\": 0},", 1);
    let cfg = ws.file("strict.json", &strict);
    let o = riskalloc(&["validate"], Some(&cfg));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

#[test]
fn seed_and_samples_flags_override_the_config() {
    let ws = Workspace::new();
    let cfg = ws.file("c.json", FGM);
    let run = |extra: &[&str], name: &str| {
        let out = ws.path(name);
        let mut args = vec!["estimate", "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert_eq!(code(&riskalloc(&args, Some(&cfg))), 0);
        serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(out).unwrap()).unwrap()
    };
    let base = run(&[], "out_a.json");
    let again = run(&[], "out_b.json");
    let reseeded = run(&["--seed", "8"], "out_c.json");
    let fewer = run(&["--samples", "1000"], "out_d.json");
    assert_eq!(base, again);
    assert_eq!(reseeded["seed"], 8);
    assert_ne!(base["i"]["value"], reseeded["i"]["value"]);
    assert_eq!(fewer["samples"], 1000);
    assert_eq!(fewer["i"]["n"], 1000);
}

#[test]
fn asymptotic_reports_limits() {
    let ws = Workspace::new();
    let cfg = ws.file("c.json", r#"{"model":{"kind":"independent_pareto","shape":2,"scales":[1,2]},"capital":100}"#);
    let out = ws.path("out_a.json");
    let o = riskalloc(&["asymptotic", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!((v["fractions"][0].as_f64().unwrap() - 0.373180).abs() < 1e-5);
    let fgm = ws.file("f.json", FGM);
    assert_eq!(code(&riskalloc(&["asymptotic"], Some(&fgm))), 1);
}
