use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rhl_core::flows::read_trajectory;
use rhl_harness::output::{validate_csv, SCHEMAS};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn rhl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhl"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn run(name: &str, out: &Path) -> Output {
    rhl(&["run", fixture(name).to_str().unwrap()], out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("does-not-exist.toml", dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("does-not-exist.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_cfl_violations_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("unknown-key.toml", dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("foo") && stderr(&o).contains("line"), "{}", stderr(&o));
    let o = run("bad-dt.toml", dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("flow.dt"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rhl(&["frobnicate"], dir.path()).status.code(), Some(64));
    assert_eq!(rhl(&["ledger", "--n", "x"], dir.path()).status.code(), Some(64));
    assert_eq!(rhl(&["ledger", "--n", "1"], dir.path()).status.code(), Some(64));
}

#[test]
fn ledger_prints_root_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhl(&["ledger", "--n", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("symbol,k,value,constraint,slack,provenance"));
    let value = |symbol: &str, k: &str| -> f64 {
        text.lines()
            .find_map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                (cols[0] == symbol && cols[1] == k).then(|| cols[2].parse().unwrap())
            })
            .unwrap_or_else(|| panic!("no {symbol} {k} in\n{text}"))
    };
    assert!((value("gamma", "2") - 5.11340).abs() < 1e-5);
    assert!((value("B", "0") - 4.37148).abs() < 1e-4);
    assert!((value("B_first", "0") - 2.12724).abs() < 1e-5);
    assert_eq!(value("C_cross", "0"), 8.0);
    assert_eq!(value("A", "1"), 16.0);
}

#[test]
fn verify_constants_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rhl(&["verify-constants"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    assert!(stdout(&o).contains("gamma2 = 5.1134"));
}

#[test]
fn minimal_run_passes_and_rows_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("small-flat.toml", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = dir.path().join("small-flat");
    for schema in SCHEMAS {
        validate_csv(&out.join(schema.file), &schema).unwrap();
    }
    assert!(validate_csv(&out.join("estimates.csv"), &SCHEMAS[2]).unwrap() == 1);
    let svg = fs::read_to_string(out.join("identity_k1.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<circle"));
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run("small-curved.toml", dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let mut files: Vec<_> = fs::read_dir(a.path().join("small-curved"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    files.sort();
    assert!(files.len() >= 10, "{files:?}");
    for f in files {
        let x = fs::read(a.path().join("small-curved").join(&f)).unwrap();
        let y = fs::read(b.path().join("small-curved").join(&f)).unwrap();
        assert!(x == y, "{f:?} differs");
    }
    for schema in SCHEMAS {
        validate_csv(&a.path().join("small-curved").join(schema.file), &schema).unwrap();
    }
    let (traj, echo) = read_trajectory(&a.path().join("small-curved/trajectory.rhl")).unwrap();
    assert!(echo.contains("name = \"small-curved\""));
    assert_eq!(traj.spec().nx, 16);
}

#[test]
fn corrupted_ledger_is_a_check_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("corrupted-ledger.toml", dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    let out = dir.path().join("corrupted-ledger");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("corrupted-ledger,ledger,false,b (k = 1)"), "{summary}");
    let estimates = fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert!(estimates.lines().nth(1).unwrap().contains(",false,ledger,"), "{estimates}");
}

#[test]
fn module_errors_exit_one_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("negative-density.toml", dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let out = dir.path().join("negative-density");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("estimate:gradient,true"), "{summary}");
    assert!(summary.contains("overall,false,"), "{summary}");
    assert!(summary.contains("final_density must be positive"), "{summary}");
}

#[test]
fn rhl_out_sets_the_default_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rhl"))
        .args(["run", fixture("small-flat.toml").to_str().unwrap()])
        .env("RHL_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(dir.path().join("small-flat/summary.csv").exists());
}
