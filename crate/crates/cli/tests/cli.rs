use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nhp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhp")).args(args).output().expect("binary runs")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn corpus_matches_declared_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let o = nhp(&["corpus", scenarios().to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}{}", stderr(&o));
    assert!(text.contains("12 scenarios, 0 mismatched"), "{text}");
    for stem in ["01_linear_nhp", "07_nonsmooth_pi", "12_cubic_barbalat"] {
        assert!(out.path().join(stem).join("verdict.json").exists(), "{stem}");
    }
}

#[test]
fn each_scenario_exits_as_declared() {
    let out = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let expected: i32 = text
            .lines()
            .find_map(|l| l.strip_prefix("expect_exit = "))
            .map_or(0, |v| v.trim().parse().unwrap());
        let dir = out.path().join(path.file_stem().unwrap());
        let o = nhp(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--workers", "2"]);
        assert_eq!(o.status.code(), Some(expected), "{}: {}", path.display(), stdout(&o));
    }
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dir = scenarios();
    nhp(&["corpus", dir.to_str().unwrap(), "--out", a.path().to_str().unwrap(), "--workers", "4"]);
    nhp(&["corpus", dir.to_str().unwrap(), "--out", b.path().to_str().unwrap(), "--workers", "1"]);
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(!fa.is_empty());
    assert_eq!(fa.len(), fb.len());
    for ((pa, ca), (pb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(pa, pb);
        assert!(ca == cb, "{} differs", pa.display());
    }
}

#[test]
fn list_shows_the_catalog() {
    let text = stdout(&nhp(&["list"]));
    for name in ["linear_hp", "sinh_hp", "cubic_hp", "sector_hp", "pi", "nonsmooth_pi"] {
        assert!(text.lines().any(|l| l == name), "{name} missing:\n{text}");
    }
    let json: serde_json::Value = serde_json::from_str(&stdout(&nhp(&["list", "--format", "json"]))).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 6);
}

#[test]
fn bad_config_exits_3_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[system]\nname = \"linear_hp\"\nlambda = -1.0\n\n[input]\nkind = \"constant\"\n").unwrap();
    let o = nhp(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("3:10: lambda must be positive (got -1)"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_5() {
    let o = nhp(&["verify", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn subcommands_select_checks() {
    let out = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("04_sinh_fenchel.toml");
    let cfg = cfg.to_str().unwrap();
    let o = nhp(&["simulate", "--config", cfg, "--out", out.path().join("s").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.path().join("s/trajectory.csv").exists());

    let o = nhp(&["ineq", "--config", cfg, "--out", out.path().join("i").to_str().unwrap(), "--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = json["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["check"], "fenchel");

    // margins here sit well above zero, so a tight override still passes
    let o = nhp(&["verify", "--config", cfg, "--out", out.path().join("v").to_str().unwrap(), "--tol-pw", "1e-12", "--format", "csv"]);
    let csv = stdout(&o);
    assert!(csv.starts_with("check,status,summary\n"), "{csv}");
    assert_eq!(csv.lines().count(), 5, "{csv}");
}

#[test]
fn trajectory_floats_round_trip() {
    let out = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("01_linear_nhp.toml");
    nhp(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    let csv = fs::read_to_string(out.path().join("trajectory.csv")).unwrap();
    let row = csv.lines().nth(5).unwrap();
    for field in row.split(',') {
        let v: f64 = field.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), field);
    }
}
