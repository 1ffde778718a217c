//! Acceptance suite: one test per numbered validation criterion.
//!
//! Each test prints its `[PASS]`/`[FAIL]` line (visible with
//! `cargo test --test acceptance -- --nocapture`) and asserts the verdict.
//! The same checks back `rmkit validate --level full`.

use rmkit::validate::{self, CriterionResult};

fn run(result: CriterionResult) {
    println!("{}", result.line());
    assert!(
        result.passed,
        "criterion {} failed: {}",
        result.id, result.details
    );
}

#[test]
fn criterion_01_invasion_rate_reference_values() {
    run(validate::criterion_01_lambda_reference());
}

#[test]
fn criterion_02_invasion_rate_limits() {
    run(validate::criterion_02_lambda_limits());
}

#[test]
fn criterion_03_invasion_rate_affinity() {
    run(validate::criterion_03_lambda_affinity());
}

#[test]
fn criterion_04_stationarity_identity() {
    run(validate::criterion_04_stationarity_identity());
}

#[test]
fn criterion_05_strong_convergence_order() {
    run(validate::criterion_05_strong_convergence());
}

#[test]
fn criterion_06_pathwise_comparison() {
    run(validate::criterion_06_pathwise_comparison());
}

#[test]
fn criterion_07_predator_extinction_rate() {
    run(validate::criterion_07_predator_extinction_rate());
}

#[test]
fn criterion_08_total_extinction_rates() {
    run(validate::criterion_08_total_extinction_rates());
}

#[test]
fn criterion_09_occupation_ks() {
    run(validate::criterion_09_occupation_ks());
}

// Known red, first clause: the invariant law of (0.6, 0.3, 2.5) keeps about
// a fifth of its mass at prey densities below 0.05 (the parameter set sits
// in the limit-cycle regime and even the noise-free cycle dips to
// x1 ≈ 0.036), so no horizon can push the [0.05,20]² mass to 0.95. The
// measured fraction is ≈ 0.75, stable under dt refinement, scheme changes
// and seeds, and the same run satisfies the exact stationarity identities
// E[x1/(1+x1)] = α and E[x1/κ + x2/(1+x1)] = 1 − ε²/2 to four digits, so
// the deficit is a property of the target box, not of the integrator. The
// check keeps its original box rather than widening it to fit.
#[test]
fn criterion_10_persistence_mass() {
    run(validate::criterion_10_persistence_mass());
}

#[test]
fn criterion_11_certificates() {
    run(validate::criterion_11_certificates());
}

#[test]
fn criterion_12_rate_exponents() {
    run(validate::criterion_12_rate_exponents());
}

#[test]
fn criterion_13_reachability() {
    run(validate::criterion_13_reachability());
}
