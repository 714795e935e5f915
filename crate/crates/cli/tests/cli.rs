//! Binary-level checks: exit codes, determinism of `gen` and `run`
//! outputs, and single-operator round trips.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn maxharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxharm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).expect("config written");
    path
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn help_exits_zero() {
    let out = maxharm(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("USAGE"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = maxharm(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown subcommand"));
}

#[test]
fn missing_config_key_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "bad.cfg", "[verify]\nmodules = all\n");
    let out = maxharm(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed"), "stderr should name the key: {err}");
}

#[test]
fn gen_writes_identical_corpora_for_identical_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for tag in ["a", "b"] {
        let dir = tmp.path().join(tag);
        let cfg = write_cfg(
            tmp.path(),
            &format!("gen-{tag}.cfg"),
            &format!(
                "[grid]\nshape = 16, 16\nh = 0.0625\ntopology = torus\n\n\
                 [corpus]\ngenerator = trig\nseed = 7\ncount = 3\ndegree = 3\n\n\
                 [output]\ndir = {}\n",
                dir.display()
            ),
        );
        let out = maxharm(&["gen", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        dirs.push(dir);
    }
    for i in 0..3 {
        let name = format!("trig-{i:04}.field");
        assert_eq!(
            read(&dirs[0].join(&name)),
            read(&dirs[1].join(&name)),
            "{name} differs between reruns"
        );
    }
}

#[test]
fn gen_stores_mappings_as_displacement_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("maps");
    let cfg = write_cfg(
        tmp.path(),
        "gen-diffeo.cfg",
        &format!(
            "[grid]\nshape = 16, 16\nh = 0.0625\ntopology = torus\n\n\
             [corpus]\ngenerator = diffeo\nseed = 3\ncount = 1\n\n\
             [output]\ndir = {}\n",
            dir.display()
        ),
    );
    let out = maxharm(&["gen", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stored = maxharm_core::io::load_field(&dir.join("diffeo-0000.field")).unwrap();
    assert!(matches!(stored, maxharm_core::io::StoredField::Vector(_)));
}

#[test]
fn run_reports_are_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for tag in ["a", "b"] {
        let dir = tmp.path().join(tag);
        let cfg = write_cfg(
            tmp.path(),
            &format!("run-{tag}.cfg"),
            &format!(
                "[experiment]\nname = smoke\ninequality = maximal_norm\n\n\
                 [grid]\nshape = 16, 16\nh = 0.0625\ntopology = torus\n\n\
                 [corpus]\ngenerator = indicator\nseed = 11\ncount = 3\n\n\
                 [ladders]\nq = 1.5, 2\n\n\
                 [output]\ndir = {}\n",
                dir.display()
            ),
        );
        let out = maxharm(&["run", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(dir);
    }
    for name in ["smoke.json", "smoke.csv"] {
        assert_eq!(
            read(&reports[0].join(name)),
            read(&reports[1].join(name)),
            "{name} differs between reruns"
        );
    }
}

#[test]
fn op_identity_round_trips_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fields");
    let cfg = write_cfg(
        tmp.path(),
        "gen-one.cfg",
        &format!(
            "[grid]\nshape = 16, 16\nh = 0.0625\ntopology = torus\n\n\
             [corpus]\ngenerator = bump\nseed = 5\ncount = 1\n\n\
             [output]\ndir = {}\n",
            dir.display()
        ),
    );
    assert_eq!(maxharm(&["gen", cfg.to_str().unwrap()]).status.code(), Some(0));
    let input = dir.join("bump-0000.field");
    let output = dir.join("copy.field");
    let out = maxharm(&[
        "op",
        "identity",
        "--in",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&input), read(&output));
}

#[test]
fn op_kind_mismatch_is_a_run_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fields");
    let cfg = write_cfg(
        tmp.path(),
        "gen-map.cfg",
        &format!(
            "[grid]\nshape = 16, 16\nh = 0.0625\ntopology = torus\n\n\
             [corpus]\ngenerator = diffeo\nseed = 1\ncount = 1\n\n\
             [output]\ndir = {}\n",
            dir.display()
        ),
    );
    assert_eq!(maxharm(&["gen", cfg.to_str().unwrap()]).status.code(), Some(0));
    let input = dir.join("diffeo-0000.field");
    let out = maxharm(&[
        "op",
        "max_hl",
        "--in",
        input.to_str().unwrap(),
        "--out",
        dir.join("never.field").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scalar"));
}
