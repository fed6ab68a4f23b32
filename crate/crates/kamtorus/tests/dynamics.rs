//! Trajectory-level checks of the model callbacks and of converged tori.

use std::sync::Arc;

use nalgebra::DVector;

use kamtorus::solver::{iterate_kam, NewtonSchedule};
use kamtorus::system::{builtin_system, HamiltonianSystem};
use kamtorus::{DiophantineParams, TorusCandidate};

const GOLDEN: f64 = 1.618_033_988_749_895;

fn rk4(sys: &HamiltonianSystem, z0: DVector<f64>, t: f64, steps: usize) -> DVector<f64> {
    let h = t / steps as f64;
    let f = |z: &DVector<f64>| sys.vector_field_real(z.as_slice());
    let mut z = z0;
    for _ in 0..steps {
        let k1 = f(&z);
        let k2 = f(&(&z + &k1 * (h / 2.0)));
        let k3 = f(&(&z + &k2 * (h / 2.0)));
        let k4 = f(&(&z + &k3 * h));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    z
}

#[test]
fn energy_drift_over_unit_time() {
    for (name, eps) in [("lagrangian_rotors", 0.02), ("symmetric_rotors", 0.01)] {
        let sys = builtin_system(name, eps).unwrap();
        let dim = 2 * sys.n();
        let z0 = DVector::from_fn(dim, |i, _| 0.1 + 0.37 * i as f64);
        let h0 = sys.hamiltonian_real(z0.as_slice());
        let z1 = rk4(&sys, z0, 1.0, 2000);
        let drift = (sys.hamiltonian_real(z1.as_slice()) - h0).abs();
        assert!(drift < 1e-8, "{name}: drift {drift:.3e}");
    }
}

#[test]
fn converged_torus_carries_the_linear_flow() {
    let sys = Arc::new(builtin_system("symmetric_rotors", 0.01).unwrap());
    let dio = DiophantineParams::scan(&[1.0, GOLDEN], 1.0, 1000).unwrap();
    let schedule = NewtonSchedule { rho0: 0.01, ..Default::default() };
    let cand = TorusCandidate::flat(sys.clone(), dio, &[16, 16], schedule.rho0).unwrap();
    let run = iterate_kam(&cand, &schedule).unwrap().into_result().unwrap();
    let torus = &run.candidate;
    let point = |theta: &[f64]| {
        let mut z = torus.k.eval_at(theta).column(0).into_owned();
        for (i, t) in theta.iter().enumerate() {
            z[i] += t;
        }
        z
    };
    let theta0 = [0.2, 0.7];
    let t = 1.0;
    let theta1: Vec<f64> = theta0.iter().zip(torus.omega()).map(|(a, w)| a + w * t).collect();
    let flowed = rk4(&sys, point(&theta0), t, 2000);
    let gap = (flowed - point(&theta1)).amax();
    assert!(gap < 1e-10, "orbit leaves the torus by {gap:.3e}");
}
