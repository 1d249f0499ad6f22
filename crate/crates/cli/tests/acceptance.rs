//! One test per acceptance criterion. Each prints a PASS/FAIL line on
//! stdout (uncaptured) and fails when the criterion fails.

use std::io::Write;

use gsf_cli::acceptance::{run_criterion, Suite};
use gsf_cli::Overrides;

fn criterion(id: u8) {
    let suite = Suite::bundled(&Overrides::default()).expect("bundled configs are valid");
    let report = run_criterion(&suite, id);
    let line = report.summary_line();
    let _ = writeln!(std::io::stdout(), "{line}");
    assert!(report.passed, "{line}");
}

#[test]
fn criterion_01_mollifier_moments() {
    criterion(1);
}

#[test]
fn criterion_02_embedding() {
    criterion(2);
}

#[test]
fn criterion_03_calculus_properties() {
    criterion(3);
}

#[test]
fn criterion_04_pendulum() {
    criterion(4);
}

#[test]
fn criterion_05_small_oscillations() {
    criterion(5);
}

#[test]
fn criterion_06_damped_two_media() {
    criterion(6);
}

#[test]
fn criterion_07_pais_uhlenbeck() {
    criterion(7);
}

#[test]
fn criterion_08_variational_identities() {
    criterion(8);
}

#[test]
fn criterion_09_optimal_control() {
    criterion(9);
}

#[test]
fn criterion_10_determinism() {
    criterion(10);
}
