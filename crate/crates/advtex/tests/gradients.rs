//! Finite-difference gradient suite: every differentiable operation and the
//! discriminator composition, randomized instances, f64 oracle.

use advtex::gradcheck::run_gradient_suite;
use std::time::Instant;

#[test]
fn all_operations_pass_finite_difference_checks() {
    let start = Instant::now();
    let reports = run_gradient_suite(2024, 20);
    let elapsed = start.elapsed();
    for r in &reports {
        println!(
            "{:<26} instances={:<3} checks={:<6} max_rel_err={:.3e}",
            r.name, r.instances, r.checks, r.max_rel_err
        );
        assert!(r.instances >= 20, "{}: need >= 20 instances", r.name);
        assert!(
            r.passed(1e-3),
            "{}: max relative error {:.3e} >= 1e-3",
            r.name,
            r.max_rel_err
        );
    }
    println!("gradient suite runtime: {elapsed:?}");
    assert!(elapsed.as_secs() < 60, "gradient suite exceeded one minute");
}
