//! Quasi-Newton iteration for a torus with fixed frequency.
//!
//! Each step writes the correction as `ΔK = L ξ^L + N ξ^N`, solves the
//! triangular cohomological system with the phase fixed by `⟨ξ^L⟩ = 0`, and
//! moves to a thinner strip according to the schedule.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomology::{solve_cohomological, CohomologyError, DiophantineParams};
use crate::fourier::{dealias_grid, FourierError, FourierMap};
use crate::frames::{FrameBundle, FrameError, TorusCandidate};
use crate::linalg::row_sum_norm;

/// Relative tolerance on `⟨η^N⟩`.
pub const COMPATIBILITY_TOL: f64 = 1e-10;
/// Tail fraction of `E` that triggers band doubling when refinement is on.
pub const REFINE_TAIL_FRACTION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error("compatibility condition fails: |<eta^N>| = {value:.3e} > {tolerance:.3e}")]
    Compatibility { value: f64, tolerance: f64 },
    #[error("hypothesis {name} fails: {detail}")]
    Hypothesis { name: String, detail: String },
    #[error("error grew in two consecutive steps (step {0})")]
    Divergence(usize),
    #[error("no convergence after {0} steps")]
    IterationCap(usize),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

/// Iteration parameters `a₁, a₂, 𝔠` and the stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSchedule {
    pub a1: f64,
    pub a2: f64,
    /// Auxiliary constant `𝔠`; `None` selects `max(1, ‖X_H∘K₀‖_{ρ₀})`.
    pub frak_c: Option<f64>,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub rho0: f64,
    /// Turn failed smallness conditions into errors instead of margins.
    pub enforce_hypotheses: bool,
    /// Double the bands when the tail of `E` exceeds [`REFINE_TAIL_FRACTION`].
    pub refine_bands: bool,
}

impl Default for NewtonSchedule {
    fn default() -> Self {
        Self {
            a1: 2.0,
            a2: 2.0,
            frak_c: None,
            max_iters: 20,
            stop_tol: 1e-12,
            rho0: 0.01,
            enforce_hypotheses: false,
            refine_bands: false,
        }
    }
}

impl NewtonSchedule {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.a1 > 1.0 && self.a2 > 1.0) {
            return Err(SolverError::InvalidSchedule(format!("a1 = {}, a2 = {} must exceed 1", self.a1, self.a2)));
        }
        if !(self.rho0 > 0.0) || !(self.stop_tol > 0.0) {
            return Err(SolverError::InvalidSchedule("rho0 and stop_tol must be positive".into()));
        }
        if let Some(c) = self.frak_c {
            if !(c > 0.0) {
                return Err(SolverError::InvalidSchedule(format!("frak_c = {c} is not positive")));
            }
        }
        Ok(())
    }

    /// `a₃ = 3a₁a₂/((a₁−1)(a₂−1))`.
    pub fn a3(&self) -> f64 {
        3.0 * self.a1 * self.a2 / ((self.a1 - 1.0) * (self.a2 - 1.0))
    }

    pub fn delta0(&self) -> f64 {
        self.rho0 / self.a3()
    }

    pub fn delta(&self, s: usize) -> f64 {
        self.delta0() / self.a1.powi(s as i32)
    }

    /// `ρ_s = ρ₀ − 3δ₀ Σ_{j<s} a₁^{−j}`.
    pub fn rho(&self, s: usize) -> f64 {
        (0..s).fold(self.rho0, |r, j| r - 3.0 * self.delta(j))
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho0 / self.a2
    }

    /// All `δ_s` an iteration may use.
    pub fn deltas(&self) -> Vec<f64> {
        (0..=self.max_iters).map(|s| self.delta(s)).collect()
    }
}

/// A named smallness condition `value < bound`, reported with its margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisMargin {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl HypothesisMargin {
    pub fn less_than(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, margin: bound - value, satisfied: value < bound }
    }
}

/// Solution of `[O, T; O, O] ξ + 𝔏_ω ξ = η`.
#[derive(Debug, Clone)]
pub struct TriangularSolution {
    pub xi_l: FourierMap,
    pub xi_n: FourierMap,
    pub xi_n0: DMatrix<f64>,
    /// Majorant of the plug-back residual at `ρ = 0`.
    pub residual: f64,
}

/// Solves the triangular system by two cohomological equations.
///
/// `xi_l0` is the free average of `ξ^L`; the solver always uses zero.
pub fn solve_triangular(
    eta_l: &FourierMap,
    eta_n: &FourierMap,
    t: &FourierMap,
    dio: &DiophantineParams,
    xi_l0: &DMatrix<f64>,
) -> Result<TriangularSolution, SolverError> {
    let scale = eta_l.norm(0.0)?.max(eta_n.norm(0.0)?).max(1.0);
    let avg_n = row_sum_norm(&eta_n.average());
    if avg_n > COMPATIBILITY_TOL * scale {
        return Err(SolverError::Compatibility { value: avg_n, tolerance: COMPATIBILITY_TOL * scale });
    }
    let avg_t_inv = crate::linalg::checked_inverse(&t.average())
        .map_err(|e| SolverError::Frame(FrameError::SingularTorsion(e)))?;
    let r_eta_n = solve_cohomological(eta_n, dio)?;
    let rhs = eta_l.sub(&t.mul(&r_eta_n)?.with_bands(eta_l.bands(), eta_l.grid())?)?.average();
    let xi_n0 = avg_t_inv * rhs;
    let xi_n = r_eta_n.add_constant(&xi_n0)?;
    let t_xi_n = t.mul(&xi_n)?.with_bands(eta_l.bands(), eta_l.grid())?;
    let top = eta_l.sub(&t_xi_n)?;
    let xi_l = solve_cohomological(&top, dio)?.add_constant(xi_l0)?;
    let residual = triangular_residual(&xi_l, &xi_n, eta_l, eta_n, t, &dio.omega)?;
    Ok(TriangularSolution { xi_l, xi_n, xi_n0, residual })
}

/// Majorant of `([O, T; O, O]ξ + 𝔏_ω ξ − η)` at `ρ = 0`.
pub fn triangular_residual(
    xi_l: &FourierMap,
    xi_n: &FourierMap,
    eta_l: &FourierMap,
    eta_n: &FourierMap,
    t: &FourierMap,
    omega: &[f64],
) -> Result<f64, FourierError> {
    let t_xi = t.mul(xi_n)?.with_bands(eta_l.bands(), eta_l.grid())?;
    let top = t_xi.add(&xi_l.lie_derivative(omega)?)?.sub(eta_l)?;
    let bottom = xi_n.lie_derivative(omega)?.sub(eta_n)?;
    Ok(top.norm(0.0)?.max(bottom.norm(0.0)?))
}

/// Everything recorded about one Newton step; serialized as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub iteration: usize,
    pub rho: f64,
    pub delta: f64,
    pub error_before: f64,
    /// `‖Ē‖_{ρ−2δ}`.
    pub error_after: f64,
    /// `‖ΔK‖_{ρ−2δ}`.
    pub correction: f64,
    pub xi_l_average: f64,
    pub compatibility: f64,
    pub solve_residual: f64,
    pub dk_norm: f64,
    pub dk_transpose_norm: f64,
    pub b_norm: f64,
    pub avg_t_inverse_norm: f64,
    pub min_singular_l: f64,
    pub b_asymmetry: f64,
    pub e_red_upper_right: f64,
    pub tail_fraction: f64,
    pub bands: Vec<usize>,
    pub hypotheses: Vec<HypothesisMargin>,
    /// Frequency correction `ξ^ω`; zero for fixed-frequency steps.
    #[serde(default)]
    pub xi_omega: f64,
    /// `|E^ω|` before the step; zero for fixed-frequency steps.
    #[serde(default)]
    pub error_omega: f64,
}

/// Outcome of a fixed-frequency step.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub candidate: TorusCandidate,
    pub frames: FrameBundle,
    pub solution: TriangularSolution,
    pub delta_k: FourierMap,
    pub diagnostics: StepDiagnostics,
}

pub(crate) fn check_hypotheses(
    margins: &[HypothesisMargin],
    enforce: bool,
) -> Result<(), SolverError> {
    if !enforce {
        return Ok(());
    }
    match margins.iter().find(|m| !m.satisfied) {
        Some(m) => Err(SolverError::Hypothesis {
            name: m.name.clone(),
            detail: format!("{:.6e} is not below {:.6e}", m.value, m.bound),
        }),
        None => Ok(()),
    }
}

/// Resolved `𝔠` for a run starting at `cand`.
pub fn frak_c(cand: &TorusCandidate, schedule: &NewtonSchedule) -> Result<f64, SolverError> {
    if let Some(c) = schedule.frak_c {
        return Ok(c);
    }
    let e = cand.invariance_error()?;
    let omega = DMatrix::from_column_slice(cand.d(), 1, cand.omega());
    let dk_omega = cand.dk()?.mul(&FourierMap::constant(cand.bands(), cand.grid(), &omega)?)?;
    Ok(e.add(&dk_omega)?.norm(schedule.rho0)?.max(1.0))
}

pub(crate) fn frame_diagnostics(
    iteration: usize,
    rho: f64,
    delta: f64,
    frames: &FrameBundle,
    cand: &TorusCandidate,
) -> Result<StepDiagnostics, SolverError> {
    let avg_t_inverse_norm = frames.avg_t_inverse().map(|m| row_sum_norm(&m)).unwrap_or(f64::INFINITY);
    Ok(StepDiagnostics {
        iteration,
        rho,
        delta,
        error_before: frames.e.norm(rho)?,
        error_after: f64::NAN,
        correction: f64::NAN,
        xi_l_average: f64::NAN,
        compatibility: row_sum_norm(&frames.compatibility),
        solve_residual: f64::NAN,
        dk_norm: frames.dk.norm(rho)?,
        dk_transpose_norm: frames.dk.transpose().norm(rho)?,
        b_norm: frames.b.norm(rho)?,
        avg_t_inverse_norm,
        min_singular_l: frames.min_singular_l,
        b_asymmetry: frames.b_asymmetry,
        e_red_upper_right: frames.e_red_upper_right(),
        tail_fraction: frames.e.tail_fraction(rho)?,
        bands: cand.bands().to_vec(),
        hypotheses: Vec::new(),
        xi_omega: 0.0,
        error_omega: 0.0,
    })
}

/// One quasi-Newton step on the strip `ρ` with loss `δ`.
pub fn newton_step(
    cand: &TorusCandidate,
    schedule: &NewtonSchedule,
    frak_c: f64,
    iteration: usize,
    rho: f64,
    delta: f64,
) -> Result<NewtonStep, SolverError> {
    let frames = FrameBundle::build(cand, None)?;
    let mut diag = frame_diagnostics(iteration, rho, delta, &frames, cand)?;
    diag.hypotheses.push(HypothesisMargin::less_than("error_over_delta", diag.error_before / delta, frak_c));
    check_hypotheses(&diag.hypotheses, schedule.enforce_hypotheses)?;

    let zero = DMatrix::zeros(cand.n(), 1);
    let solution = solve_triangular(&frames.eta_l, &frames.eta_n, &frames.t, &cand.dio, &zero)?;
    let delta_k = frames
        .l
        .mul(&solution.xi_l)?
        .add(&frames.n.mul(&solution.xi_n)?)?
        .with_bands(cand.bands(), cand.grid())?;
    let next = cand.with_k(cand.k.add(&delta_k)?, rho - 3.0 * delta);

    let distance = next.domain_distance(next.rho);
    diag.hypotheses.push(HypothesisMargin::less_than("domain_escape", 0.0, distance));
    if !(distance > 0.0) {
        return Err(SolverError::Frame(FrameError::DomainEscape(distance)));
    }
    diag.error_after = next.invariance_error()?.norm(rho - 2.0 * delta)?;
    diag.correction = delta_k.norm(rho - 2.0 * delta)?;
    diag.xi_l_average = row_sum_norm(&solution.xi_l.average());
    diag.solve_residual = solution.residual;
    Ok(NewtonStep { candidate: next, frames, solution, delta_k, diagnostics: diag })
}

/// Final state of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Diverged,
    IterationCap,
    Failed,
}

/// Result of [`iterate_kam`]: the last candidate, the per-step log and the history.
#[derive(Debug, Clone)]
pub struct KamRun {
    pub status: RunStatus,
    pub failure: Option<SolverError>,
    pub candidate: TorusCandidate,
    pub final_error: f64,
    pub steps: usize,
    pub log: Vec<StepDiagnostics>,
    /// Candidates `K_0, …, K_s`, one per visited strip.
    pub history: Vec<TorusCandidate>,
    pub frak_c: f64,
}

impl KamRun {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn into_result(self) -> Result<Self, SolverError> {
        match (&self.status, &self.failure) {
            (RunStatus::Converged, _) => Ok(self),
            (_, Some(e)) => Err(e.clone()),
            (RunStatus::Diverged, None) => Err(SolverError::Divergence(self.steps)),
            _ => Err(SolverError::IterationCap(self.steps)),
        }
    }

    /// `log ‖E_{s+1}‖ / log ‖E_s‖` for consecutive logged errors above `floor`.
    pub fn contraction_slopes(&self, floor: f64) -> Vec<f64> {
        let errs: Vec<f64> = self.log.iter().map(|d| d.error_before).chain([self.final_error]).collect();
        errs.windows(2)
            .filter(|w| w[0] > floor && w[1] > floor && w[0] < 1.0)
            .map(|w| w[1].ln() / w[0].ln())
            .collect()
    }
}

pub(crate) fn maybe_refine(cand: TorusCandidate, e: &FourierMap, rho: f64, on: bool) -> Result<TorusCandidate, SolverError> {
    if !on || e.tail_fraction(rho)? <= REFINE_TAIL_FRACTION {
        return Ok(cand);
    }
    let bands: Vec<usize> = cand.bands().iter().map(|b| 2 * b).collect();
    let k = cand.k.with_bands(&bands, &dealias_grid(&bands))?;
    Ok(cand.with_k(k, cand.rho))
}

/// Error growth tracker implementing the two-consecutive-increases rule.
#[derive(Debug, Default)]
pub(crate) struct DivergenceGuard {
    last: Option<f64>,
    increases: usize,
}

impl DivergenceGuard {
    pub(crate) fn record(&mut self, err: f64) -> bool {
        if let Some(prev) = self.last {
            if err > prev {
                self.increases += 1;
            } else {
                self.increases = 0;
            }
        }
        self.last = Some(err);
        self.increases >= 2
    }
}

/// Runs [`newton_step`] along the strip schedule until `‖E‖_{ρ_s} ≤ stop_tol`.
pub fn iterate_kam(cand: &TorusCandidate, schedule: &NewtonSchedule) -> Result<KamRun, SolverError> {
    schedule.validate()?;
    let c = frak_c(cand, schedule)?;
    let mut current = cand.with_k(cand.k.clone(), schedule.rho0);
    let mut run = KamRun {
        status: RunStatus::IterationCap,
        failure: None,
        candidate: current.clone(),
        final_error: f64::NAN,
        steps: 0,
        log: Vec::new(),
        history: vec![current.clone()],
        frak_c: c,
    };
    let mut guard = DivergenceGuard::default();
    for s in 0..=schedule.max_iters {
        let rho = schedule.rho(s);
        let e = current.invariance_error()?;
        let err = e.norm(rho)?;
        run.final_error = err;
        run.candidate = current.clone();
        run.steps = s;
        if err <= schedule.stop_tol {
            run.status = RunStatus::Converged;
            return Ok(run);
        }
        if guard.record(err) {
            run.status = RunStatus::Diverged;
            run.failure = Some(SolverError::Divergence(s));
            return Ok(run);
        }
        if s == schedule.max_iters {
            break;
        }
        current = maybe_refine(current, &e, rho, schedule.refine_bands)?;
        match newton_step(&current, schedule, c, s, rho, schedule.delta(s)) {
            Ok(step) => {
                run.log.push(step.diagnostics);
                current = step.candidate;
                run.history.push(current.clone());
            }
            Err(err) => {
                run.status = RunStatus::Failed;
                run.failure = Some(err);
                return Ok(run);
            }
        }
    }
    run.failure = Some(SolverError::IterationCap(schedule.max_iters));
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::builtin_system;
    use num_complex::Complex64;
    use std::f64::consts::PI;
    use std::sync::Arc;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn dio() -> DiophantineParams {
        DiophantineParams::scan(&[1.0, GOLDEN], 1.0, 200).unwrap()
    }

    fn flat(name: &str, eps: f64, bands: usize) -> TorusCandidate {
        let sys = Arc::new(builtin_system(name, eps).unwrap());
        TorusCandidate::flat(sys, dio(), &[bands, bands], 0.01).unwrap()
    }

    #[test]
    fn schedule_bookkeeping() {
        let s = NewtonSchedule::default();
        assert_eq!(s.a3(), 12.0);
        assert!((s.delta0() - 0.01 / 12.0).abs() < 1e-18);
        for k in 0..40 {
            assert!(s.rho(k + 1) < s.rho(k));
            assert!(s.rho(k + 1) > s.rho_inf());
        }
        assert!((s.rho(60) - s.rho_inf()).abs() < 1e-15);
        assert!(NewtonSchedule { a1: 1.0, ..s.clone() }.validate().is_err());
    }

    #[test]
    fn zero_data_gives_the_free_average() {
        let bands = [4, 4];
        let grid = dealias_grid(&bands);
        let z = FourierMap::zeros(&bands, &grid, 2, 1).unwrap();
        let t = FourierMap::constant(&bands, &grid, &DMatrix::identity(2, 2)).unwrap();
        let xi0 = DMatrix::from_column_slice(2, 1, &[0.3, -0.1]);
        let sol = solve_triangular(&z, &z, &t, &dio(), &xi0).unwrap();
        assert_eq!(sol.xi_n.max_coeff(), 0.0);
        assert_eq!(sol.xi_l.average(), xi0);
        assert_eq!(sol.xi_l.zero_average().max_coeff(), 0.0);
    }

    #[test]
    fn cosine_chain() {
        let bands = [4, 4];
        let grid = dealias_grid(&bands);
        let t = FourierMap::constant(&bands, &grid, &DMatrix::identity(2, 2)).unwrap();
        let eta_l = FourierMap::zeros(&bands, &grid, 2, 1).unwrap();
        let eta_n = FourierMap::from_fn(&bands, &grid, 2, 1, |th| {
            DMatrix::from_column_slice(2, 1, &[(2.0 * PI * th[0]).cos(), 0.0])
        })
        .unwrap();
        let sol = solve_triangular(&eta_l, &eta_n, &t, &dio(), &DMatrix::zeros(2, 1)).unwrap();
        let r = solve_cohomological(&eta_n, &dio()).unwrap();
        assert!(sol.xi_n0.amax() < 1e-16);
        assert!(sol.xi_n.sub(&r).unwrap().max_coeff() < 1e-16);
        let expected_l = solve_cohomological(&r.scale(-1.0), &dio()).unwrap();
        assert!(sol.xi_l.sub(&expected_l).unwrap().max_coeff() < 1e-16);
        assert!(sol.residual < 1e-14);
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let bands = [2, 2];
        let grid = dealias_grid(&bands);
        let t = FourierMap::constant(&bands, &grid, &DMatrix::identity(2, 2)).unwrap();
        let zero = FourierMap::zeros(&bands, &grid, 2, 1).unwrap();
        let eta_n = FourierMap::constant(&bands, &grid, &DMatrix::from_column_slice(2, 1, &[1e-6, 0.0])).unwrap();
        let err = solve_triangular(&zero, &eta_n, &t, &dio(), &DMatrix::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, SolverError::Compatibility { .. }));
    }

    #[test]
    fn random_band_limited_data_plugs_back() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let bands = [6, 6];
        let grid = dealias_grid(&bands);
        let mut random_map = |rows, cols, zero_avg: bool| {
            let mut m = FourierMap::zeros(&bands, &grid, rows, cols).unwrap();
            for k1 in -6i64..=6 {
                for k2 in -6i64..=6 {
                    if (k1, k2) < (0, 0) || (zero_avg && (k1, k2) == (0, 0)) {
                        continue;
                    }
                    for i in 0..rows {
                        for j in 0..cols {
                            let decay = (-0.6 * (k1.abs() + k2.abs()) as f64).exp();
                            let im = if (k1, k2) == (0, 0) { 0.0 } else { rng.random_range(-1.0..1.0) };
                            m.set_coeff(&[k1, k2], i, j, Complex64::new(rng.random_range(-1.0..1.0), im) * decay);
                        }
                    }
                }
            }
            m
        };
        let eta_l = random_map(2, 1, false);
        let eta_n = random_map(2, 1, true);
        let t = random_map(2, 2, false).add_constant(&(DMatrix::identity(2, 2) * 3.0)).unwrap().with_bands(&[2, 2], &grid).unwrap().with_bands(&bands, &grid).unwrap();
        let sol = solve_triangular(&eta_l, &eta_n, &t, &dio(), &DMatrix::zeros(2, 1)).unwrap();
        let scale = eta_l.norm(0.0).unwrap().max(eta_n.norm(0.0).unwrap());
        assert!(sol.residual <= 1e-11 * scale, "{} vs {}", sol.residual, scale);
    }

    #[test]
    fn exact_torus_converges_without_steps() {
        let run = iterate_kam(&flat("symmetric_rotors", 0.0, 4), &NewtonSchedule::default()).unwrap();
        assert!(run.converged());
        assert_eq!(run.steps, 0);
        assert!(run.log.is_empty());
    }

    #[test]
    fn zero_error_step_is_the_identity() {
        let cand = flat("lagrangian_rotors", 0.0, 4);
        let s = NewtonSchedule::default();
        let step = newton_step(&cand, &s, 1.0, 0, s.rho0, s.delta0()).unwrap();
        assert_eq!(step.delta_k.max_coeff(), 0.0);
        assert_eq!(step.candidate.k.sub(&cand.k).unwrap().max_coeff(), 0.0);
    }

    #[test]
    fn one_step_is_quadratic_for_small_perturbations() {
        let cand = flat("lagrangian_rotors", 1e-3, 16);
        let s = NewtonSchedule::default();
        let step = newton_step(&cand, &s, 1.0, 0, s.rho0, s.delta0()).unwrap();
        let d = &step.diagnostics;
        assert!(d.compatibility < 1e-12);
        assert!(d.xi_l_average < 1e-15);
        assert!(d.error_after * 100.0 <= d.error_before, "{} -> {}", d.error_before, d.error_after);
    }

    #[test]
    fn enforced_smallness_is_named() {
        let cand = flat("lagrangian_rotors", 1e-2, 8);
        let s = NewtonSchedule { enforce_hypotheses: true, ..NewtonSchedule::default() };
        match newton_step(&cand, &s, 1.0, 0, s.rho0, s.delta0()) {
            Err(SolverError::Hypothesis { name, .. }) => assert_eq!(name, "error_over_delta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn divergence_guard_needs_two_increases() {
        let mut g = DivergenceGuard::default();
        assert!(!g.record(1.0));
        assert!(!g.record(2.0));
        assert!(!g.record(1.5));
        assert!(!g.record(1.6));
        assert!(g.record(1.7));
    }
}
