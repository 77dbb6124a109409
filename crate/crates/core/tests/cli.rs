use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coherent_soliton::correspondence::OverlapSeries;
use coherent_soliton::harness::preset;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coherent-soliton"));
    cmd.env("RUST_LOG", "error");
    cmd
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn free_coherence_run_stays_coherent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "free.toml", preset("free_coherence").unwrap());
    let out = tmp.path().join("free");
    let res = run_config(&cfg, &out, &[]);
    assert_eq!(code(&res), 0, "{}", stdout(&res));
    assert!(stdout(&res).contains("PASS one_minus_abs_r"));

    let text = fs::read_to_string(out.join("overlap.csv")).unwrap();
    assert!(text.starts_with("# coherent-soliton run_id="));
    assert!(text.contains("# config:\n# schema_version = 1\n"));
    let series = OverlapSeries::read_csv(text.as_bytes()).unwrap();
    assert_eq!(series.len(), 26);
    let worst = series.r.iter().map(|z| 1.0 - z.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn slope_check_run_writes_slope_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "slope.toml", preset("slope_check").unwrap());
    let out = tmp.path().join("slope");
    let res = run_config(&cfg, &out, &[]);
    assert_eq!(code(&res), 0, "{}", stdout(&res));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("slope.json")).unwrap()).unwrap();
    assert!(json["relative_error"].as_f64().unwrap() < 0.01);
    assert_eq!(json["config"]["model"]["coupling"].as_f64(), Some(-0.1));
    assert_eq!(json["run_id"], serde_json::from_str::<serde_json::Value>(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap()["run_id"]);
}

#[test]
fn negative_n_max_is_a_usage_error_with_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("free_coherence").unwrap().replace("n_max = 4", "n_max = -2");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let out = tmp.path().join("bad");
    let res = run_config(&cfg, &out, &[]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("model.n_max must be ≥ 1, got -2"));
    assert!(!out.exists());
}

#[test]
fn parse_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("free_coherence").unwrap().replace("n_max = 4", "n_max = 4\nnmax = 3");
    let cfg = write_config(tmp.path(), "typo.toml", &text);
    let res = run_config(&cfg, &tmp.path().join("typo"), &[]);
    assert_eq!(code(&res), 2);
    let err = String::from_utf8_lossy(&res.stderr).into_owned();
    assert!(err.contains("nmax") && err.contains("line"), "{err}");
}

#[test]
fn budget_violation_is_named_before_compute() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("free_coherence").unwrap().replace("sites = 6", "sites = 12");
    let cfg = write_config(tmp.path(), "huge.toml", &text);
    let out = tmp.path().join("huge");
    let res = run_config(&cfg, &out, &[]);
    assert_eq!(code(&res), 2);
    assert!(!out.exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["engine_xcheck", "classical_only"] {
        let cfg = write_config(tmp.path(), &format!("{name}.toml"), preset(name).unwrap());
        let (a, b) = (tmp.path().join(format!("{name}_a")), tmp.path().join(format!("{name}_b")));
        assert_eq!(code(&run_config(&cfg, &a, &[])), 0);
        assert_eq!(code(&run_config(&cfg, &b, &[])), 0);
        let mut files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(files.len() >= 2);
        for f in files {
            assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{name}/{f:?}");
        }
    }
}

#[test]
fn verify_accepts_a_run_and_catches_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "free.toml", preset("free_coherence").unwrap());
    let out = tmp.path().join("free");
    assert_eq!(code(&run_config(&cfg, &out, &[])), 0);
    let res = run(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stdout(&res));

    // push |r| at one sample far below 1
    let csv = out.join("overlap.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.len() - 1;
    let mut cols: Vec<String> = lines[last].split(',').map(String::from).collect();
    cols[1] = "5.0000000000000000e-1".into();
    cols[2] = "0.0000000000000000e0".into();
    lines[last] = cols.join(",");
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let res = run(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(stdout(&res).contains("MISMATCH"));
}

#[test]
fn verify_without_manifest_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["verify", "--out", tmp.path().to_str().unwrap()])), 2);
}

#[test]
fn coupling_sweep_is_linear_and_verifiable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sweep.toml", preset("sweep_coupling").unwrap());
    let out = tmp.path().join("sweep");
    let res = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "{}", stdout(&res));
    assert!(stdout(&res).contains("PASS im_s1_linear_r2"));
    for k in 0..5 {
        assert!(out.join(format!("point_{k:03}")).join("slope.json").is_file());
    }
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("index,coupling,status,passed"));
    assert_eq!(rows.len(), 6);
    assert_eq!(code(&run(&["verify", "--out", out.to_str().unwrap()])), 0);
}

#[test]
fn sweep_records_point_failures_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"schema_version = 1
scenario = "free_coherence"

[model]
sites = 4
spacing = 1.0
coupling = 0.0
n_max = 2

[field]
peak_alpha = 0.1

[evolve]
t_final = 1.0
samples = 5

[sweep]
parameter = "n_max"
values = [2, 6]
"#;
    let cfg = write_config(tmp.path(), "strict.toml", text);
    let out = tmp.path().join("strict");
    let res = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--strict-truncation"])
        .output()
        .unwrap();
    assert_eq!(code(&res), 1, "{}", stdout(&res));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(table.contains(",error,"));
    assert!(out.join("point_001").join("run.json").is_file());
    assert!(!out.join("point_000").exists());
}

#[test]
fn empty_sweep_axis_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = preset("sweep_coupling")
        .unwrap()
        .replace("values = [-0.2, -0.1, 0.0, 0.1, 0.2]", "values = []");
    let cfg = write_config(tmp.path(), "empty.toml", &text);
    let out = tmp.path().join("empty");
    let res = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("sweep.values is empty"));
    assert!(!out.exists());
}

#[test]
fn presets_list_and_print() {
    let res = run(&["presets"]);
    assert_eq!(code(&res), 0);
    assert!(stdout(&res).contains("slope_check"));
    let res = run(&["presets", "engine_xcheck"]);
    assert_eq!(stdout(&res), preset("engine_xcheck").unwrap());
    assert_eq!(code(&run(&["presets", "nope"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}
