//! Release gate: one test per acceptance criterion, printing its pass/fail
//! line (visible with `--nocapture`, and always on failure).

use qsd_core::acceptance::{self, CriterionResult};

fn require(result: CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn criterion_01_decay_parameter() {
    require(acceptance::criterion_01_decay_parameter());
}

#[test]
fn criterion_02_lcd() {
    require(acceptance::criterion_02_lcd());
}

#[test]
fn criterion_03_invariance_residuals() {
    require(acceptance::criterion_03_invariance_residuals());
}

#[test]
fn criterion_04_semigroup() {
    require(acceptance::criterion_04_semigroup());
}

#[test]
fn criterion_05_asymptotic_constants() {
    require(acceptance::criterion_05_asymptotic_constants());
}

#[test]
fn criterion_06_potential() {
    require(acceptance::criterion_06_potential());
}

#[test]
fn criterion_07_conjectures_mm1() {
    require(acceptance::criterion_07_conjectures_mm1());
}

#[test]
fn criterion_08_critical_branching() {
    require(acceptance::criterion_08_critical_branching());
}

#[test]
fn criterion_09_random_walk() {
    require(acceptance::criterion_09_random_walk());
}

#[test]
fn criterion_10_monte_carlo() {
    require(acceptance::criterion_10_monte_carlo());
}

#[test]
fn criterion_11_property_suite() {
    require(acceptance::criterion_11_property_suite());
}
