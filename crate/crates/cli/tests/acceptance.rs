//! Acceptance suite: every criterion must pass on the shipped config,
//! in-process and through the installed binary.

use maxharm::config::Config;
use maxharm::verify::{verify_all, VerifyOptions};
use std::path::PathBuf;
use std::process::Command;

fn shipped_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/verify.cfg")
}

#[test]
fn acceptance_criteria() {
    let cfg = Config::load(&shipped_config()).expect("shipped config parses");
    let opts = VerifyOptions::from_config(&cfg).expect("shipped config is complete");
    let results = verify_all(&opts);
    assert_eq!(results.len(), 10, "expected all ten criteria to run");

    let mut failures = Vec::new();
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {:<22} {status}  {}",
            r.index, r.name, r.detail
        );
        if !r.passed {
            failures.push(format!("criterion {} {}: {}", r.index, r.name, r.detail));
        }
    }
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}

#[test]
fn shipped_config_verifies_through_the_binary() {
    let status = Command::new(env!("CARGO_BIN_EXE_maxharm"))
        .arg("verify")
        .arg(shipped_config())
        .status()
        .expect("binary runs");
    assert!(status.success(), "verify exited with {status}");
}
