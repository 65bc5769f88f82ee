//! Fixtures shared by the benchmarks.

use qnipm::{generate_centered, GeneratedInstance, IteratePoint};

/// A centred feasible instance with `m = n / 2` and its central start.
pub fn centered_fixture(n: usize, seed: u64) -> (GeneratedInstance, IteratePoint) {
    let g = generate_centered(n, (n / 2).max(1), 1.0, seed).expect("fixture generation");
    let start = g.central_start.clone().expect("centred instances carry a start");
    (g, start)
}
