//! The ten acceptance criteria at their stated tolerances, one test each.
//! Run with `--nocapture` to see the metric lines.

use std::time::Instant;

use tdco_core::verify::{run, Criterion, CriterionReport, VerifySettings};

fn check(criterion: Criterion) -> CriterionReport {
    let start = Instant::now();
    let report = run(criterion, &VerifySettings::default());
    println!("{}  ({:.2} s)", report.summary_line(), start.elapsed().as_secs_f64());
    println!("    {}", report.details);
    assert!(report.passed, "{}\n{}", report.summary_line(), report.details);
    report
}

#[test]
fn criterion_01_mehler_reduction() {
    let start = Instant::now();
    check(Criterion::Mehler);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "runtime {elapsed} s");
}

#[test]
fn criterion_02_caustic_crossing() {
    check(Criterion::Caustic);
}

#[test]
fn criterion_03_free_particle_limit() {
    check(Criterion::FreeParticle);
}

#[test]
fn criterion_04_gauge_invariance() {
    check(Criterion::Gauge);
}

#[test]
fn criterion_05_full_system_oracle_equivalence() {
    check(Criterion::Oracle);
}

#[test]
fn criterion_06_van_vleck_equivalence() {
    check(Criterion::VanVleck);
}

#[test]
fn criterion_07_ermakov_residual() {
    check(Criterion::ErmakovResidual);
}

#[test]
fn criterion_08_semigroup() {
    check(Criterion::Semigroup);
}

#[test]
fn criterion_09_uncoupled_reduction() {
    check(Criterion::Uncoupled);
}

#[test]
fn criterion_10_decoupling_detector() {
    check(Criterion::Decoupling);
}
