mod common;

use common::{primitive_gradchecks, tiny_network_gradcheck, GRAD_TOL};

#[test]
fn every_primitive_matches_central_differences() {
    let failures: Vec<String> = primitive_gradchecks()
        .into_iter()
        .filter(|&(_, worst)| !(worst <= GRAD_TOL))
        .map(|(name, worst)| format!("{name}: {worst:e}"))
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn tiny_hyve_plus_plus_network() {
    let worst = tiny_network_gradcheck();
    assert!(worst <= GRAD_TOL, "worst relative error {worst:e}");
}
