//! The `cornerlab` binary: exit codes, formats and reproducibility.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cornerlab"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().expect("exit code")
}

const MAXWELL: &str = "[model]\nname = \"maxwell\"\nmesh = \"interval\"\nn = 6\n";

#[test]
fn empty_suite_exits_zero_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MAXWELL);
    let out = dir.path().join("out");
    assert_eq!(code(bin().args(["run", "--config", &cfg, "--out"]).arg(&out)), 0);
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn configuration_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad_model = write(dir.path(), "m.toml", "suite = [\"algebra\"]\n[model]\nname = \"proca\"\nmesh = \"disk\"\nn = 1\n");
    assert_eq!(code(bin().args(["run", "--config", &bad_model])), 3);
    let bad_version = write(dir.path(), "v.toml", &format!("suite = [\"algebra\"]\n{MAXWELL}[tolerances]\nversion = 2\n"));
    assert_eq!(code(bin().args(["run", "--config", &bad_version])), 3);
    let unknown_key = write(dir.path(), "k.toml", &format!("colour = 3\n{MAXWELL}"));
    assert_eq!(code(bin().args(["run", "--config", &unknown_key])), 3);
    assert_eq!(code(bin().args(["run", "--config", "/nonexistent/cfg.toml"])), 3);
}

#[test]
fn unknown_check_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MAXWELL);
    assert_eq!(code(bin().args(["run", "--config", &cfg, "--check", "no_such_check"])), 4);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(bin().args(["run", "--frobnicate"])), 2);
    assert_eq!(code(bin().args(["run", "--config", "x.toml", "--format", "xml"])), 2);
    assert_eq!(code(bin().arg("--help")), 0);
}

#[test]
fn json_config_matches_toml_and_formats_override() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "c.toml", &format!("seed = 5\nsuite = [\"flow_residual\", \"gauss_law\"]\nsamples = 10\n{MAXWELL}"));
    let j = write(
        dir.path(),
        "c.json",
        r#"{"seed": 5, "suite": ["flow_residual", "gauss_law"], "samples": 10,
            "model": {"name": "maxwell", "mesh": "interval", "n": 6}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(bin().args(["run", "--config", &t, "--out"]).arg(&a)), 0);
    assert_eq!(code(bin().args(["run", "--config", &j, "--out"]).arg(&b)), 0);
    for name in ["flow_residual.json", "gauss_law.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let c = dir.path().join("c");
    assert_eq!(code(bin().args(["run", "--config", &t, "--format", "csv", "--out"]).arg(&c)), 0);
    let csv = fs::read_to_string(c.join("flow_residual.csv")).unwrap();
    assert!(csv.starts_with("key,value\n"));
    assert!(!c.join("flow_residual.json").exists());
}

#[test]
fn seed_override_changes_reports_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("suite = [\"decomposition\"]\nsamples = 10\n{MAXWELL}"));
    let run = |seed: &str, out: &str| {
        let o = dir.path().join(out);
        assert_eq!(code(bin().args(["run", "--config", &cfg, "--seed", seed, "--out"]).arg(&o)), 0);
        fs::read(o.join("decomposition.json")).unwrap()
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn convergence_census_and_hodge_report_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[model]\nname = \"maxwell\"\nmesh = \"disk\"\nn = 1\n");
    let out = dir.path().join("out");
    assert_eq!(code(bin().args(["convergence", "--config", &cfg, "--study", "green", "--out"]).arg(&out)), 0);
    assert!(out.join("convergence_green.json").exists());
    assert_eq!(code(bin().args(["census", "--config", &cfg, "--out"]).arg(&out)), 0);
    assert!(out.join("census.json").exists());
    assert_eq!(code(bin().args(["hodge-report", "--config", &cfg, "--out"]).arg(&out)), 0);
    assert!(out.join("hodge_report.json").exists());
    assert_eq!(code(bin().args(["convergence", "--config", &cfg, "--study", "nope"])), 3);
}
