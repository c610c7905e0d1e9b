mod common;

use common::criteria::{corrupted_gradient_detected, gradient_check_suite};

#[test]
fn backprop_matches_finite_differences() {
    let v = gradient_check_suite(4, 1e-3);
    assert!(v.pass, "{}", v.detail);
}

#[test]
fn scaled_gradient_is_rejected() {
    let v = corrupted_gradient_detected(1e-3);
    assert!(v.pass, "{}", v.detail);
}
