//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use kamtorus::{builtin_system, DiophantineParams, TorusCandidate};

pub const GOLDEN: f64 = 1.618_033_988_749_895;

pub fn golden() -> DiophantineParams {
    DiophantineParams::scan(&[1.0, GOLDEN], 1.0, 1000).expect("golden frequency")
}

/// Unperturbed torus of a built-in system with square bands.
pub fn flat_torus(system: &str, epsilon: f64, bands: usize, rho: f64) -> TorusCandidate {
    let sys = Arc::new(builtin_system(system, epsilon).expect("builtin system"));
    TorusCandidate::flat(sys, golden(), &[bands, bands], rho).expect("flat torus")
}
