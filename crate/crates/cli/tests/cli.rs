use std::path::Path;
use std::process::{Command, Output};

fn dbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbp"))
        .args(args)
        .output()
        .expect("spawn dbp")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
experiments = ["cauchy-identity", "cross-formulation"]

[domain]
shapes = ["disk(0,0,1)", "disk(0,0,1)"]
grids = [16, 24, 32]

[tolerances]
fft_check_grid = 16
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = dbp(&["run", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nope.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = dbp(&["selftest", "--frobnicate"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--frobnicate"));
    let o = dbp(&[]);
    assert_eq!(code(&o), 1);
}

#[test]
fn help_exits_zero() {
    let o = dbp(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("selftest"));
}

#[test]
fn bad_overrides_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for extra in [
        vec!["--extension", "reflection:9"],
        vec!["--factor-order", "1,1"],
        vec!["--grid", "32,16"],
    ] {
        let mut args = vec!["run", cfg.as_str()];
        args.extend(extra.iter().copied());
        let o = dbp(&args);
        assert_eq!(code(&o), 1, "{extra:?}: {}", stderr(&o));
    }
}

#[test]
fn corpus_with_same_seed_is_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = dbp(&["corpus", "--seed", "7", "--grid", "16", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 2);
    for n in &names {
        let x = std::fs::read(a.path().join(n)).unwrap();
        let y = std::fs::read(b.path().join(n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
    let c = tempfile::tempdir().unwrap();
    dbp(&["corpus", "--seed", "8", "--out", c.path().to_str().unwrap()]);
    assert_ne!(
        std::fs::read(a.path().join("corpus.json")).unwrap(),
        std::fs::read(c.path().join("corpus.json")).unwrap()
    );
}

#[test]
fn corpus_spec_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "seed = 3\n[family]\nkind = \"polynomial\"\ndegree = 0\n").unwrap();
    let o = dbp(&["corpus", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("corpus.json")).unwrap()).unwrap();
    assert_eq!(v["members"].as_array().unwrap().len(), 4);

    let o = dbp(&["corpus", spec.to_str().unwrap(), "-m", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn norms_of_a_corpus_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let o = dbp(&["corpus", "--grid", "16", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let snap = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "dbpf"))
        .unwrap();
    let o = dbp(&["norms", snap.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let comps = v.as_array().unwrap();
    assert!(!comps.is_empty());
    for c in comps {
        let norms = c["norms"]["norms"].as_array().unwrap();
        assert_eq!(norms.len(), 6);
        assert!(norms.iter().all(|n| n["value"].as_f64().unwrap() > 0.0));
        let band = c["norms"]["fubini_band"].as_array().unwrap();
        assert!(band[0].as_f64().unwrap() > 0.0);
    }
    let o = dbp(&["norms", dir.path().join("missing.dbpf").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn run_writes_reports_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let o = dbp(&["run", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(v["schema"], "dbp-report/1");
        v["timestamp"] = serde_json::Value::Null;
        v["config"]["out"] = serde_json::Value::Null;
        reports.push(v);
        let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
        let header = csv.lines().next().unwrap();
        for col in ["grid", "h", "member", "raw"] {
            assert!(header.split(',').any(|c| c == col), "{header}");
        }
        assert!(csv.lines().count() > 1);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn threshold_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("fft_check_grid = 16", "fft_check_grid = 16\nfft_vs_direct = 1e-300");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = dbp(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(out.join("report.json").exists());
}

#[test]
fn selftest_passes_within_five_minutes() {
    let t = std::time::Instant::now();
    let o = dbp(&["selftest"]);
    let secs = t.elapsed().as_secs_f64();
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}");
    assert!(!out.contains("FAIL"));
    assert!(secs <= 300.0, "{secs}s");
}
